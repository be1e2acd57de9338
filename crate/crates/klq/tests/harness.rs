use std::fs;
use std::path::PathBuf;

use klq::datasets::{encode_count_table, word_frequencies, zipf_frequencies};
use klq::harness::{
    badprior_exact, build_codec, fnv1a, load_dataset, log_grid, power_sweep, run,
    weighted_line_fit, ConstantsCache, DecodeChoice, ExperimentConfig, Method, Source,
};
use klq::{Compander, Error, MaximinConstants};

fn config(methods: &[&str], ks: Vec<usize>, bits: Vec<u32>, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        methods: methods.iter().map(|m| m.parse().unwrap()).collect(),
        source: Source::Synthetic(ks),
        bits,
        decode: DecodeChoice::Midpoint,
        trials,
        seed: 42,
        constants_cache: None,
    }
}

#[test]
fn method_names() {
    for s in [
        "truncation",
        "approx_minimax",
        "minimax",
        "power",
        "power:0.25",
        "float",
        "beta",
    ]
    .iter()
    .chain(&["beta:0.5", "l2sq", "l1"])
    {
        let m: Method = s.parse().unwrap();
        assert_eq!(m.to_string(), *s);
    }
    assert_eq!(
        "power:0.25".parse::<Method>().unwrap(),
        Method::Power(Some(0.25))
    );
    assert_eq!("beta:1".parse::<Method>().unwrap().to_string(), "beta");
    for bad in ["uniform", "power:x", "float:3", ""] {
        assert!(
            matches!(bad.parse::<Method>(), Err(Error::Usage(_))),
            "{bad:?}"
        );
    }
    assert_eq!(
        "centroid".parse::<DecodeChoice>().unwrap(),
        DecodeChoice::Centroid
    );
    assert!("mid".parse::<DecodeChoice>().is_err());
}

#[test]
fn validation() {
    let ok = config(&["truncation", "float"], vec![10], vec![8, 16], 5);
    ok.validate().unwrap();
    let cases = vec![
        ExperimentConfig {
            methods: vec![],
            ..ok.clone()
        },
        ExperimentConfig {
            bits: vec![],
            ..ok.clone()
        },
        ExperimentConfig {
            bits: vec![0],
            ..ok.clone()
        },
        ExperimentConfig {
            bits: vec![33],
            ..ok.clone()
        },
        ExperimentConfig {
            bits: vec![12],
            ..ok.clone()
        },
        ExperimentConfig {
            trials: 0,
            ..ok.clone()
        },
        ExperimentConfig {
            source: Source::Synthetic(vec![]),
            ..ok.clone()
        },
        ExperimentConfig {
            source: Source::Synthetic(vec![10, 1]),
            ..ok.clone()
        },
        ExperimentConfig {
            source: Source::Datasets {
                paths: vec![],
                kmer_k: 2,
            },
            ..ok.clone()
        },
        ExperimentConfig {
            source: Source::Datasets {
                paths: vec!["x.txt".into()],
                kmer_k: 2,
            },
            decode: DecodeChoice::Centroid,
            ..ok.clone()
        },
    ];
    for c in cases {
        assert!(matches!(c.validate(), Err(Error::Usage(_))), "{c:?}");
        assert!(matches!(run(&c), Err(Error::Usage(_))));
    }
    // 12 bits is fine without the float method
    config(&["truncation"], vec![10], vec![12], 5)
        .validate()
        .unwrap();
}

#[test]
fn runs_are_reproducible() {
    let c = config(
        &["truncation", "approx_minimax", "minimax"],
        vec![20, 50],
        vec![6, 10],
        50,
    );
    let a = run(&c).unwrap();
    let b = run(&c).unwrap();
    assert_eq!(a.body().unwrap(), b.body().unwrap());
    assert_eq!(a.header, b.header);
    assert_eq!(a.header[0], "seed=42");
    assert_eq!(
        a.header[1],
        format!("config_hash={:016x}", fnv1a(c.canonical().as_bytes()))
    );
    assert_eq!(a.reports.len(), 12);
    assert!(a.header.iter().any(|h| h.starts_with("constants K=20 ")));

    let other = run(&ExperimentConfig {
        seed: 43,
        ..c.clone()
    })
    .unwrap();
    assert_ne!(a.body().unwrap(), other.body().unwrap());
    assert_ne!(c.hash(), ExperimentConfig { seed: 43, ..c }.hash());

    let mut out = Vec::new();
    a.write(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("# seed=42\n# config_hash="));
}

#[test]
fn fnv_reference_values() {
    assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
    assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    assert_eq!(fnv1a(b"foobar"), 0x8594_4171_f739_67e8);
}

#[test]
fn synthetic_ordering() {
    let c = config(
        &["truncation", "approx_minimax", "power", "float"],
        vec![10_000],
        vec![8, 16],
        40,
    );
    let out = run(&c).unwrap();
    for bits in [8u32, 16] {
        let n = 1u64 << bits;
        let loss = |m: &str| {
            out.reports
                .iter()
                .find(|r| r.method == m && r.n == n)
                .map(|r| r.nats)
                .unwrap()
        };
        let am = loss("approx_minimax");
        assert!(
            am < loss("float") && loss("float") < loss("truncation"),
            "bits {bits}"
        );
        assert!(loss("power").is_finite());
    }
}

#[test]
fn power_sweep_prefers_one_over_log_k() {
    let k = 10_000;
    let x = zipf_frequencies(k, 1.0).unwrap();
    let grid = log_grid(0.02, 0.8, 41);
    let sweep = power_sweep(x.as_slice(), &grid, 12).unwrap();
    let (s_best, _) = sweep
        .iter()
        .min_by(|a, b| a.1.nats.total_cmp(&b.1.nats))
        .unwrap();
    let target = 1.0 / (k as f64).ln();
    assert!(
        *s_best > target / 2.0 && *s_best < target * 2.0,
        "{s_best} vs {target}"
    );
    assert!(power_sweep(x.as_slice(), &grid, 0).is_err());
    let g = log_grid(0.1, 1.0, 3);
    assert!((g[1] - 0.1f64.sqrt()).abs() < 1e-15 && g[2] == 1.0);
}

#[test]
fn constants_cache_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("constants.txt");
    let mut cache = ConstantsCache::load(&path).unwrap();
    assert_eq!(cache.entries().count(), 0);
    let c = cache.get(100).unwrap();
    assert_eq!(c, MaximinConstants::solve(100).unwrap());
    cache.save(&path).unwrap();
    let mut back = ConstantsCache::load(&path).unwrap();
    assert_eq!(back.entries().copied().collect::<Vec<_>>(), vec![c]);
    assert_eq!(back.get(100).unwrap(), c);

    fs::write(&path, "K=100 c_K=0.5 a_K=1 b_K=1\n").unwrap();
    assert!(ConstantsCache::load(&path).is_err());

    let cfg = ExperimentConfig {
        constants_cache: Some(dir.path().join("run.txt")),
        ..config(&["minimax"], vec![30], vec![8], 3)
    };
    run(&cfg).unwrap();
    let text = fs::read_to_string(dir.path().join("run.txt")).unwrap();
    assert!(text.starts_with("K=30 "));
}

#[test]
fn datasets_by_type() {
    let dir = tempfile::tempdir().unwrap();
    let fa: PathBuf = dir.path().join("g.fa");
    fs::write(&fa, ">x\nACGTAC\n").unwrap();
    let d = load_dataset(&fa, 2).unwrap();
    assert_eq!(d.k(), 16);
    assert_eq!(d.counts.iter().sum::<u64>(), 5);

    let txt = dir.path().join("t.txt");
    fs::write(&txt, "to be or not to be").unwrap();
    let words = load_dataset(&txt, 2).unwrap();
    assert_eq!(words.k(), 4);

    let bin = dir.path().join("counts.bin");
    fs::write(
        &bin,
        encode_count_table(&word_frequencies("a a b".as_bytes()).unwrap()),
    )
    .unwrap();
    let t = load_dataset(&bin, 2).unwrap();
    assert_eq!(t.counts.iter().sum::<u64>(), 3);
    assert!(t.source.ends_with("counts.bin"));

    assert!(load_dataset(&dir.path().join("missing.txt"), 2).is_err());

    let cfg = ExperimentConfig {
        source: Source::Datasets {
            paths: vec![fa, txt],
            kmer_k: 2,
        },
        ..config(&["truncation", "approx_minimax"], vec![], vec![8], 1)
    };
    let out = run(&cfg).unwrap();
    assert_eq!(out.reports.len(), 4);
    // absent k-mers stay at zero, so no divergence is infinite
    assert!(out
        .reports
        .iter()
        .all(|r| r.infinite_events == 0 && r.nats.is_finite()));
}

#[test]
fn codec_errors() {
    let mut cache = ConstantsCache::default();
    assert!(build_codec(
        Method::Float,
        10,
        12,
        DecodeChoice::Midpoint,
        None,
        &mut cache
    )
    .is_err());
    assert!(build_codec(
        Method::Truncation,
        10,
        8,
        DecodeChoice::Centroid,
        None,
        &mut cache
    )
    .is_err());
    assert!(build_codec(
        Method::Power(Some(-1.0)),
        10,
        8,
        DecodeChoice::Midpoint,
        None,
        &mut cache
    )
    .is_err());
}

#[test]
fn badprior_exact_matches_scaling() {
    let k = 10;
    let f = Compander::approx_minimax(k as u64).unwrap();
    let a = badprior_exact(k, &f, 64).unwrap();
    let b = badprior_exact(k, &f, 256).unwrap();
    assert!(a > b && b > 0.0);
    // N² L̃ stays bounded for the minimax-style compander
    assert!((b * 256.0 * 256.0) / (a * 64.0 * 64.0) < 1.5);
}

#[test]
fn line_fit() {
    let t = [0.0, 1.0, 2.0, 3.0];
    let y: Vec<f64> = t.iter().map(|t| 1.5 - 0.25 * t).collect();
    let f = weighted_line_fit(&t, &y, &[1.0; 4]).unwrap();
    assert!((f.intercept - 1.5).abs() < 1e-14 && (f.slope + 0.25).abs() < 1e-14);
    // unit weights: var(b) = 1/Σ(t − t̄)² = 1/5
    assert!((f.slope_stderr - 0.2f64.sqrt()).abs() < 1e-14);
    assert!(weighted_line_fit(&t, &y, &[1.0, 1.0, 0.0, 1.0]).is_err());
    assert!(weighted_line_fit(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
    assert!(weighted_line_fit(&[1.0], &[0.0], &[1.0]).is_err());
}
