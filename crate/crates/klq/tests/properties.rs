use klq::compander::CompanderSpec;
use klq::datasets::{decode_count_table, encode_count_table, EmpiricalDistribution};
use klq::float_format::FloatFormat;
use klq::records::{pack_codes, parse_vector, unpack_codes, CodeFile};
use klq::{kl_divergence, Compander, ProbVector, Quantizer};
use proptest::prelude::*;

fn companders() -> impl Strategy<Value = Compander> {
    prop_oneof![
        Just(Compander::identity()),
        (0.05f64..1.0).prop_map(|s| Compander::power(s).unwrap()),
        (5u64..100_000).prop_map(|k| Compander::approx_minimax(k).unwrap()),
        (2u64..1000).prop_map(|k| Compander::l2sq(k).unwrap()),
        (2u64..500, 0.2f64..4.0).prop_map(|(k, a)| Compander::beta(k, a).unwrap()),
    ]
}

fn weights(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![Just(0.0), 1e-12f64..1.0, 0.0f64..1.0],
        2..max_len,
    )
    .prop_filter("some mass", |w| w.iter().sum::<f64>() > 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn codes_are_monotone(f in companders(), bits in 1u32..20, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let q = Quantizer::midpoint(f, 1u64 << bits).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(q.encode(lo).unwrap() <= q.encode(hi).unwrap());
    }

    #[test]
    fn values_fall_in_their_bin(f in companders(), bits in 1u32..20, x in 1e-300f64..=1.0) {
        let q = Quantizer::midpoint(f, 1u64 << bits).unwrap();
        let n = q.encode(x).unwrap();
        prop_assert!(n >= 1 && n <= q.levels());
        let (lo, hi) = q.bin_interval(n).unwrap();
        prop_assert!(lo < x && x <= hi, "{lo} < {x} <= {hi}");
        let y = q.decode(n).unwrap();
        prop_assert!(lo <= y && y <= hi);
        prop_assert_eq!(q.encode(y).unwrap(), n);
    }

    #[test]
    fn normalized_output_sums_to_one(f in companders(), bits in 1u32..24, w in weights(60)) {
        let x = ProbVector::from_weights(w).unwrap();
        let q = Quantizer::midpoint(f, 1u64 << bits).unwrap();
        let out = q.quantize_vector(&x).unwrap();
        prop_assert!((out.z.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (z, v) in out.z.as_slice().iter().zip(x.as_slice()) {
            prop_assert_eq!(*z == 0.0, *v == 0.0);
        }
        prop_assert!(kl_divergence(x.as_slice(), out.z.as_slice()).unwrap().is_finite());
    }

    #[test]
    fn float_rounding_is_idempotent(x in 0.0f64..=1.0, wide in any::<bool>()) {
        let fmt = if wide { FloatFormat::Bfloat16 } else { FloatFormat::Minifloat8 };
        let y = fmt.roundtrip(x).unwrap();
        prop_assert_eq!(fmt.roundtrip(y).unwrap(), y);
        prop_assert_eq!(y == 0.0, x == 0.0);
    }

    #[test]
    fn kl_is_nonnegative(a in weights(30), seed in any::<u64>()) {
        let x = ProbVector::from_weights(a.clone()).unwrap();
        // a fully supported y of the same length
        let y: Vec<f64> = a.iter().enumerate()
            .map(|(i, _)| 1.0 + ((seed.rotate_left(i as u32 * 7) & 0xff) as f64))
            .collect();
        let y = ProbVector::from_weights(y).unwrap();
        prop_assert!(kl_divergence(x.as_slice(), y.as_slice()).unwrap() >= 0.0);
        prop_assert_eq!(kl_divergence(x.as_slice(), x.as_slice()).unwrap(), 0.0);
    }

    #[test]
    fn spec_text_roundtrip(s in 0.01f64..1.0, k in 5u64..1_000_000, a in 0.1f64..10.0) {
        for spec in [
            CompanderSpec::Power { s },
            CompanderSpec::ApproxMinimax { k },
            CompanderSpec::Beta { k, alpha: a },
            CompanderSpec::L2Sq { k },
            CompanderSpec::Identity,
        ] {
            let back: CompanderSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }
    }

    #[test]
    fn vector_text_roundtrip(v in prop::collection::vec(0.0f64..1e3, 1..50)) {
        let text: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        prop_assert_eq!(parse_vector(&text.join("\n")).unwrap(), v.clone());
        prop_assert_eq!(parse_vector(&text.join(", ")).unwrap(), v);
    }

    #[test]
    fn packing_roundtrip(width in 1u32..=64, raw in prop::collection::vec(any::<u64>(), 0..40)) {
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let codes: Vec<u64> = raw.iter().map(|c| c & mask).collect();
        let bytes = pack_codes(&codes, width).unwrap();
        prop_assert_eq!(bytes.len(), (codes.len() * width as usize).div_ceil(8));
        prop_assert_eq!(unpack_codes(&bytes, width, codes.len()).unwrap(), codes);
    }

    #[test]
    fn code_file_roundtrip(bits in 1u32..=32, k in 5u64..10_000, raw in prop::collection::vec(any::<u64>(), 0..40)) {
        let levels = 1u64 << bits;
        let f = CodeFile {
            spec: CompanderSpec::ApproxMinimax { k },
            levels,
            zero_bin: true,
            codes: raw.iter().map(|c| c % (levels + 1)).collect(),
        };
        prop_assert_eq!(CodeFile::decode(&f.encode().unwrap()).unwrap(), f);
    }

    #[test]
    fn count_table_roundtrip(entries in prop::collection::btree_map("[a-z'!,]{1,8}", 1u64..1_000_000, 1..30)) {
        let (symbols, counts): (Vec<String>, Vec<u64>) = entries.into_iter().unzip();
        let d = EmpiricalDistribution { label: "t".into(), symbols, counts, source: String::new() };
        let back = decode_count_table(&encode_count_table(&d)).unwrap();
        prop_assert_eq!(back.symbols, d.symbols);
        prop_assert_eq!(back.counts, d.counts);
    }

    #[test]
    fn decoders_reject_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = CodeFile::decode(&bytes);
        let _ = decode_count_table(&bytes);
        let mut tagged = b"KQCD".to_vec();
        tagged.extend(&bytes);
        let _ = CodeFile::decode(&tagged);
    }
}
