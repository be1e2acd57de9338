use klq::compander::CompanderSpec;
use klq::constants::parse_constants_cache;
use klq::distill::JointDistribution;
use klq::records::{
    code_width, pack_codes, parse_joint_csv, parse_vector, unpack_codes, write_joint_csv,
    write_worstcase_csv, CodeFile,
};
use klq::worstcase::{worstcase_bound, BoundMethod};
use klq::{Error, MaximinConstants};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn widths() {
    assert_eq!(code_width(1), 1);
    assert_eq!(code_width(2), 2);
    assert_eq!(code_width(255), 8);
    assert_eq!(code_width(256), 9);
    assert_eq!(code_width(1 << 16), 17);
}

#[test]
fn packing_is_lsb_first() {
    let bytes = pack_codes(&[1, 2, 3], 3).unwrap();
    // 001 | 010 | 011 → bits 0..9 = 1,0,0, 0,1,0, 1,1,0
    assert_eq!(bytes, vec![0b1101_0001, 0b0000_0000]);
    assert_eq!(unpack_codes(&bytes, 3, 3).unwrap(), vec![1, 2, 3]);
    assert!(pack_codes(&[8], 3).is_err());
    assert!(unpack_codes(&bytes, 3, 6).is_err());
    let wide = [u64::MAX, 0, 1 << 63];
    assert_eq!(
        unpack_codes(&pack_codes(&wide, 64).unwrap(), 64, 3).unwrap(),
        wide
    );
}

#[test]
fn code_file_roundtrip() {
    let f = CodeFile {
        spec: CompanderSpec::ApproxMinimax { k: 5 },
        levels: 256,
        zero_bin: true,
        codes: vec![0, 1, 256, 17, 99],
    };
    let bytes = f.encode().unwrap();
    assert_eq!(&bytes[..4], b"KQCD");
    assert_eq!(CodeFile::decode(&bytes).unwrap(), f);
    for cut in 0..bytes.len() {
        assert!(CodeFile::decode(&bytes[..cut]).is_err(), "cut {cut}");
    }
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(CodeFile::decode(&bad).is_err());

    let g = CodeFile {
        zero_bin: false,
        ..f.clone()
    };
    assert!(CodeFile::decode(&g.encode().unwrap()).is_err());
    let big = CodeFile {
        levels: 255,
        codes: vec![256],
        ..f
    };
    assert!(big.encode().is_err());
}

#[test]
fn worstcase_csv() {
    let b = worstcase_bound(BoundMethod::ApproxMinimax, 1000, 256);
    let mut out = Vec::new();
    write_worstcase_csv(&mut out, &[(b.clone(), b.bound / 4.0)]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,K,N,bound,achieved,ratio");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["approx_minimax", "1000", "256"]);
    assert_eq!(row[3].parse::<f64>().unwrap(), b.bound);
    assert_eq!(row[5], "0.25");
}

#[test]
fn joint_csv() {
    let j =
        parse_joint_csv("a,b,probability\n# comment\n0,0,0.25\n1,1,0.5\n0,1,0.125\n0,1,0.125\n")
            .unwrap();
    assert_eq!((j.alphabet_a(), j.alphabet_b()), (2, 2));
    assert_eq!(j.prob(0, 1), 0.25);
    assert_eq!(j.prob(1, 0), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let j = JointDistribution::random(3, 4, &mut rng).unwrap();
    let mut out = Vec::new();
    write_joint_csv(&mut out, &j).unwrap();
    let back = parse_joint_csv(std::str::from_utf8(&out).unwrap()).unwrap();
    assert_eq!(back, j);

    for (bad, line) in [
        ("0,0\n", 1),
        ("0,0,1\nx,0,0\n", 2),
        ("0,0,-1\n", 1),
        ("0,0,NaN\n", 1),
        ("0,5000,1\n", 1),
    ] {
        match parse_joint_csv(bad) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
            other => panic!("{bad:?}: {other:?}"),
        }
    }
    assert!(matches!(
        parse_joint_csv("# nothing\n"),
        Err(Error::EmptyDistribution)
    ));
    assert!(parse_joint_csv("0,0,0.5\n").is_err());
}

#[test]
fn vectors() {
    assert_eq!(
        parse_vector("0.5, 0.25\n0.25 # tail\n").unwrap(),
        vec![0.5, 0.25, 0.25]
    );
    assert_eq!(parse_vector("1e-3\t2E-3").unwrap(), vec![1e-3, 2e-3]);
    assert!(matches!(
        parse_vector("# only\n\n"),
        Err(Error::EmptyDistribution)
    ));
    assert!(matches!(
        parse_vector("0.1\n0.2 abc"),
        Err(Error::Parse { line: 2, .. })
    ));
}

#[test]
fn constants_records() {
    let cs: Vec<MaximinConstants> = [5u64, 100, 10_000]
        .iter()
        .map(|&k| MaximinConstants::solve(k).unwrap())
        .collect();
    let text: String = cs.iter().map(|c| format!("{c}\n")).collect();
    assert_eq!(parse_constants_cache(&text).unwrap(), cs);
    for c in &cs {
        assert_eq!(c.to_string().parse::<MaximinConstants>().unwrap(), *c);
    }
    assert!("K=10 c=0.4".parse::<MaximinConstants>().is_err());
    assert!(parse_constants_cache("garbage\n").is_err());
}
