//! Replays the checked-in fuzz corpus, plus seeded mutations of every seed,
//! through the same checks the fuzz targets make.

use std::fs;
use std::path::PathBuf;

use klq::compander::{build_compander, CompanderSpec};
use klq::constants::parse_constants_cache;
use klq::datasets::{decode_count_table, encode_count_table, kmer_frequencies, word_frequencies};
use klq::records::{
    parse_joint_csv, parse_vector, read_loss_csv, write_joint_csv, write_loss_csv, CodeFile,
};
use klq::MaximinConstants;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MUTATIONS: usize = 3000;
const TOKENS: &[u8] = b"0123456789.,-e: =\n#>ACGTNK";

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<Vec<u8>> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| fs::read(e.unwrap().path()).unwrap())
        .collect();
    assert!(!out.is_empty(), "no seeds for {target}");
    out.sort();
    out
}

fn mutate(seed: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut v = seed.to_vec();
    for _ in 0..rng.gen_range(1..4) {
        let at = rng.gen_range(0..=v.len());
        match rng.gen_range(0..5) {
            0 if at < v.len() => v[at] ^= 1 << rng.gen_range(0..8),
            1 if at < v.len() => {
                v.remove(at);
            }
            2 => v.insert(at, rng.gen()),
            3 => v.insert(at, TOKENS[rng.gen_range(0..TOKENS.len())]),
            _ => v.truncate(at),
        }
    }
    v
}

fn replay(target: &str, check: impl Fn(&[u8])) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for seed in seeds(target) {
        check(&seed);
        for _ in 0..MUTATIONS {
            check(&mutate(&seed, &mut rng));
        }
    }
}

#[test]
fn fasta() {
    replay("fasta", |data| {
        if let Some((&k, rest)) = data.split_first() {
            if let Ok(d) = kmer_frequencies(rest, (k % 8) as usize) {
                assert_eq!(d.symbols.len(), d.counts.len());
                assert!(d.counts.iter().sum::<u64>() > 0);
            }
        }
    });
}

#[test]
fn words() {
    replay("words", |data| {
        if let Ok(d) = word_frequencies(data) {
            assert!((d.frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d.symbols.iter().all(|s| !s.is_empty()));
        }
    });
}

#[test]
fn compander_spec() {
    replay("compander_spec", |data| {
        let Ok(text) = std::str::from_utf8(data) else {
            return;
        };
        let Ok(spec) = text.parse::<CompanderSpec>() else {
            return;
        };
        let again: CompanderSpec = spec.to_string().parse().expect("printed spec parses");
        assert_eq!(again.to_string(), spec.to_string());
        if let Ok(f) = build_compander(&spec) {
            assert!((0.0..=1.0).contains(&f.forward(0.5)));
        }
    });
}

#[test]
fn constants_record() {
    replay("constants_record", |data| {
        let Ok(text) = std::str::from_utf8(data) else {
            return;
        };
        if let Ok(c) = text.parse::<MaximinConstants>() {
            assert_eq!(c.to_string().parse::<MaximinConstants>().unwrap(), c);
        }
        let _ = parse_constants_cache(text);
    });
}

#[test]
fn joint_csv() {
    replay("joint_csv", |data| {
        let Ok(text) = std::str::from_utf8(data) else {
            return;
        };
        if let Ok(j) = parse_joint_csv(text) {
            let mut out = Vec::new();
            write_joint_csv(&mut out, &j).unwrap();
            assert_eq!(
                parse_joint_csv(std::str::from_utf8(&out).unwrap()).unwrap(),
                j
            );
            assert!(j.mutual_information() >= -1e-12);
        }
    });
}

#[test]
fn code_file() {
    replay("code_file", |data| {
        if let Ok(f) = CodeFile::decode(data) {
            assert!(f.codes.iter().all(|&c| c <= f.levels));
            assert_eq!(CodeFile::decode(&f.encode().unwrap()).unwrap(), f);
        }
    });
}

#[test]
fn count_table() {
    replay("count_table", |data| {
        if let Ok(d) = decode_count_table(data) {
            assert_eq!(encode_count_table(&d), data);
        }
    });
}

#[test]
fn vector() {
    replay("vector", |data| {
        let Ok(text) = std::str::from_utf8(data) else {
            return;
        };
        if let Ok(v) = parse_vector(text) {
            assert!(!v.is_empty());
        }
    });
}

#[test]
fn loss_csv() {
    replay("loss_csv", |data| {
        if let Ok(rows) = read_loss_csv(data) {
            let mut out = Vec::new();
            write_loss_csv(&mut out, &rows).unwrap();
            assert_eq!(read_loss_csv(&out[..]).unwrap().len(), rows.len());
        }
    });
}
