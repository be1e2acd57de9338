use std::sync::Arc;

use klq::compander::{build_compander, l1_gamma};
use klq::float_format::FloatFormat;
use klq::{Compander, CompanderSpec, DecodeMode, Density, MaximinConstants, ProbVector, Quantizer};

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (1..n).map(move |i| i as f64 / n as f64)
}

fn families() -> Vec<Compander> {
    vec![
        Compander::identity(),
        Compander::power(0.5).unwrap(),
        Compander::power(0.2).unwrap(),
        Compander::minimax_for(100).unwrap(),
        Compander::approx_minimax(1000).unwrap(),
        Compander::beta(50, 1.0).unwrap(),
        Compander::beta(20, 0.5).unwrap(),
        Compander::l2sq(30).unwrap(),
        Compander::l1(30).unwrap(),
        Compander::power(0.4).unwrap().blend(0.1).unwrap(),
    ]
}

#[test]
fn endpoints_and_inverse() {
    for f in families() {
        assert_eq!(f.forward(0.0), 0.0, "{}", f.family());
        assert!((f.forward(1.0) - 1.0).abs() < 1e-15, "{}", f.family());
        for x in grid(200) {
            let y = f.forward(x);
            let back = f.inverse(y).unwrap();
            // one ulp of y moves x by about ε/f′(x) where f flattens out
            let tol = 1e-12f64.max(4.0 * f64::EPSILON / f.derivative(x));
            assert!(
                (back - x).abs() <= tol,
                "{}: {x} -> {y} -> {back}",
                f.family()
            );
        }
    }
}

#[test]
fn derivative_matches_finite_difference() {
    for f in families() {
        for x in [0.013, 0.1, 0.37, 0.8] {
            if 1.0 - f.forward(x) < 1e-6 {
                continue;
            }
            let h = 1e-6 * x;
            let fd = (f.forward(x + h) - f.forward(x - h)) / (2.0 * h);
            let d = f.derivative(x);
            assert!(
                (d - fd).abs() <= 1e-6 * d.abs(),
                "{} at {x}: {d} vs {fd}",
                f.family()
            );
        }
    }
}

#[test]
fn power_half_bins() {
    let q = Quantizer::midpoint(Compander::power(0.5).unwrap(), 4).unwrap();
    let want = [
        (0.0, 1.0 / 16.0),
        (1.0 / 16.0, 0.25),
        (0.25, 9.0 / 16.0),
        (9.0 / 16.0, 1.0),
    ];
    for (n, (lo, hi)) in (1..=4).zip(want) {
        let (a, b) = q.bin_interval(n).unwrap();
        assert!((a - lo).abs() < 1e-15 && (b - hi).abs() < 1e-15, "bin {n}");
    }
    assert_eq!(q.encode(0.3).unwrap(), 3);
    assert_eq!(q.decode(4).unwrap(), 0.78125);
    assert_eq!(q.decode(0).unwrap(), 0.0);
}

#[test]
fn identity_codes() {
    let f = Compander::identity();
    for x in grid(50) {
        assert_eq!(f.forward(x), x);
        assert_eq!(f.inverse(x).unwrap(), x);
        assert_eq!(f.derivative(x), 1.0);
    }
    let q = Quantizer::midpoint(f.clone(), 256).unwrap();
    assert_eq!(q.encode(0.5).unwrap(), 128);
    let q4 = Quantizer::midpoint(f, 4).unwrap();
    assert_eq!(q4.bin_interval(2).unwrap(), (0.25, 0.5));
}

#[test]
fn approx_minimax_endpoints() {
    for k in [10, 1000, 100_000] {
        let f = Compander::approx_minimax(k).unwrap();
        assert_eq!(f.forward(0.0), 0.0);
        assert!((f.forward(1.0) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn approx_minimax_is_minimax_at_half() {
    for k in [10u64, 100, 12345] {
        let a = Compander::approx_minimax(k).unwrap();
        let m = Compander::minimax(MaximinConstants::from_c(k, 0.5));
        for x in grid(500) {
            assert!((a.forward(x) - m.forward(x)).abs() < 1e-12);
        }
    }
}

#[test]
fn reencode_inside_bin() {
    let q = Quantizer::midpoint(Compander::approx_minimax(100).unwrap(), 256).unwrap();
    let c = q.encode(0.01).unwrap();
    let (lo, hi) = q.bin_interval(c).unwrap();
    for t in [1e-9, 0.25, 0.5, 0.75, 1.0] {
        let x = lo + t * (hi - lo);
        assert_eq!(q.encode(x).unwrap(), c, "x = {x}");
    }
}

#[test]
fn bins_tile_unit_interval() {
    for f in families() {
        let q = Quantizer::midpoint(f.clone(), 16).unwrap();
        let mut prev = 0.0;
        for n in 1..=16 {
            let (lo, hi) = q.bin_interval(n).unwrap();
            assert_eq!(lo, prev, "{} bin {n}", f.family());
            assert!(hi > lo);
            let mid = q.decode(n).unwrap();
            assert!(lo < mid && mid < hi);
            prev = hi;
        }
        assert!((prev - 1.0).abs() < 1e-15);
        assert!(q.bin_interval(0).is_err());
        assert!(q.bin_interval(17).is_err());
    }
}

#[test]
fn encode_rejects_out_of_range() {
    let q = Quantizer::midpoint(Compander::identity(), 8).unwrap();
    assert!(q.encode(-0.1).is_err());
    assert!(q.encode(1.5).is_err());
    assert!(q.encode(f64::NAN).is_err());
    assert_eq!(q.encode(0.0).unwrap(), 0);
    assert_eq!(q.encode(1e-300).unwrap(), 1);
    assert_eq!(q.encode(1.0).unwrap(), 8);
}

#[test]
fn parameter_errors() {
    assert!(Compander::power(0.0).is_err());
    assert!(Compander::power(-1.0).is_err());
    assert!(Compander::power(1.5).is_err());
    assert!(Compander::approx_minimax(1).is_err());
    assert!(Compander::beta(10, 0.0).is_err());
    assert!(Quantizer::midpoint(Compander::identity(), 0).is_err());
}

#[test]
fn centroid_under_uniform_is_midpoint() {
    let f = Compander::power(0.5).unwrap();
    let d = Arc::new(Density::uniform(0.0, 1.0).unwrap());
    let qc = Quantizer::new(f.clone(), 32, DecodeMode::Centroid(d)).unwrap();
    let qm = Quantizer::midpoint(f, 32).unwrap();
    for n in 1..=32 {
        assert!((qc.decode(n).unwrap() - qm.decode(n).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn quantize_vector_examples() {
    let q = Quantizer::midpoint(Compander::identity(), 16).unwrap();
    let x = ProbVector::new(vec![0.7, 0.2, 0.06, 0.04]).unwrap();
    let out = q.quantize_vector(&x).unwrap();
    assert_eq!(out.codes, vec![12, 4, 1, 1]);
    assert_eq!(out.raw, vec![0.71875, 0.21875, 0.03125, 0.03125]);
    assert_eq!(out.z.as_slice(), &out.raw[..]);

    let q = Quantizer::midpoint(Compander::approx_minimax(3).unwrap(), 8).unwrap();
    let out = q
        .quantize_vector(&ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap())
        .unwrap();
    assert_eq!(out.z.as_slice(), &[1.0, 0.0, 0.0]);
    assert_eq!(
        klq::kl_divergence(&[1.0, 0.0, 0.0], out.z.as_slice()).unwrap(),
        0.0
    );

    let k = 7;
    let u = ProbVector::uniform(k).unwrap();
    let out = q.quantize_vector(&u).unwrap();
    for &z in out.z.as_slice() {
        assert!((z - 1.0 / k as f64).abs() < 1e-16);
    }
}

#[test]
fn dominance_certificates_hold() {
    let fams = [
        Compander::minimax_for(1000).unwrap(),
        Compander::approx_minimax(100).unwrap(),
        Compander::power(0.5).unwrap(),
        Compander::power(0.1).unwrap(),
        Compander::l2sq(20).unwrap().blend(0.2).unwrap(),
    ];
    for f in fams {
        let (c, alpha) = f.dominance_certificate().unwrap();
        assert!(c > 0.0 && alpha == 0.5);
        let mut prev = 0.0;
        for i in 1..=20000 {
            let x = (i as f64 / 20000.0).powi(3);
            let g = f.forward(x) - c * x.sqrt();
            assert!(g >= prev - 1e-14, "{} at {x}", f.family());
            prev = g;
        }
    }
    assert!(Compander::power(0.75)
        .unwrap()
        .dominance_certificate()
        .is_none());
}

#[test]
fn spec_text_roundtrip() {
    let specs = [
        CompanderSpec::Identity,
        CompanderSpec::Power { s: 0.25 },
        CompanderSpec::ApproxMinimax { k: 1000 },
        CompanderSpec::Minimax {
            constants: MaximinConstants::solve(50).unwrap(),
        },
        CompanderSpec::Beta { k: 10, alpha: 0.5 },
        CompanderSpec::L2Sq { k: 12 },
        CompanderSpec::L1 {
            k: 12,
            gamma: l1_gamma(12).unwrap(),
        },
        CompanderSpec::Custom {
            xs: vec![0.0, 0.3, 1.0],
            ys: vec![0.0, 0.6, 1.0],
        },
        CompanderSpec::Blend {
            delta: 0.1,
            base: Box::new(CompanderSpec::Power { s: 0.3 }),
        },
    ];
    for s in specs {
        let text = s.to_string();
        let back: CompanderSpec = text.parse().unwrap();
        assert_eq!(back, s, "{text}");
        let f = build_compander(&back).unwrap();
        assert_eq!(f.spec(), &s);
    }
    assert!("power:".parse::<CompanderSpec>().is_err());
    assert!("nonsense".parse::<CompanderSpec>().is_err());
}

#[test]
fn other_loss_companders() {
    let k = 10.0;
    let f = Compander::l2sq(10).unwrap();
    for x in grid(40) {
        let want = ((1.0 + k * (k - 2.0) * x).sqrt() - 1.0) / (k - 2.0);
        assert!((f.forward(x) - want).abs() < 1e-14);
    }
    let g = l1_gamma(10).unwrap();
    let f = Compander::l1(10).unwrap();
    for x in grid(40) {
        let want = (g * x + 1.0).ln() / (g + 1.0).ln();
        assert!((f.forward(x) - want).abs() < 1e-14);
    }
}

#[test]
fn float_examples() {
    assert_eq!(FloatFormat::Bfloat16.roundtrip(0.5).unwrap(), 0.5);
    assert_eq!(FloatFormat::Minifloat8.roundtrip(1.0).unwrap(), 1.0);
    assert_eq!(FloatFormat::Minifloat8.roundtrip(0.0).unwrap(), 0.0);

    let values: Vec<f64> = (0..=255u16)
        .map(|c| FloatFormat::Minifloat8.decode(c))
        .collect();
    for w in values.windows(2) {
        assert!(w[1] >= w[0]);
    }
    for x in [1.0 / 3.0, 0.01, 0.77, 3e-4] {
        let nearest = values
            .iter()
            .copied()
            .filter(|v| *v <= 1.0)
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
            .unwrap();
        assert_eq!(
            FloatFormat::Minifloat8.roundtrip(x).unwrap(),
            nearest,
            "x = {x}"
        );
    }
    // bfloat16 keeps the top 16 bits of an f32, rounding to nearest even
    let x = 0.123456789f64;
    let y = FloatFormat::Bfloat16.roundtrip(x).unwrap();
    assert!((y - x).abs() <= x * 2f64.powi(-8));
}
