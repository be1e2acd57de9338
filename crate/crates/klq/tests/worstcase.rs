use std::f64::consts::E;

use klq::worstcase::{adversarial_search, minimax_level_threshold, worstcase_bound, BoundMethod};
use klq::{Compander, Quantizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn level_condition_reaches_huge_alphabets() {
    assert!(minimax_level_threshold(2.6e25, 1.0) <= 256.0);
    assert!(minimax_level_threshold(3e25, 1.0) > 256.0);
    for m in [BoundMethod::Minimax, BoundMethod::ApproxMinimax] {
        assert!(worstcase_bound(m, u64::MAX, 256).valid);
        assert!(!worstcase_bound(m, 1000, 32).valid);
        assert!(!worstcase_bound(m, 4, 1 << 20).valid);
    }
}

#[test]
fn bound_values() {
    let (k, n) = (1000u64, 256u64);
    let lk = (k as f64).ln();
    let b = worstcase_bound(BoundMethod::ApproxMinimax, k, n);
    let manual = (1.0 + 18.0 * lk.ln() / lk) * lk.powi(2) / (n as f64).powi(2);
    assert!((b.bound - manual).abs() <= 1e-15 * manual);
    assert!(b.err <= 7.0);
    assert_eq!(worstcase_bound(BoundMethod::Minimax, k, n).bound, b.bound);

    let s = worstcase_bound(BoundMethod::ApproxMinimaxSharp, k, n);
    assert!(s.valid && s.bound < b.bound);
    assert!(!worstcase_bound(BoundMethod::ApproxMinimaxSharp, 54, n).valid);

    let p = worstcase_bound(BoundMethod::Power, k, n);
    let half = E / 2.0 * lk;
    let manual = (1.0 + half / (n as f64 - half)) * E * E / 2.0 * lk * lk / (n as f64).powi(2);
    assert!((p.bound - manual).abs() <= 1e-15 * manual);
    let simple = p.simplified.unwrap();
    assert!((simple - E * E * lk * lk / (n as f64).powi(2)).abs() <= 1e-15 * simple);
    assert!(p.bound <= simple);
    // below e ln K the simplified form is not claimed
    assert!(worstcase_bound(BoundMethod::Power, k, 15)
        .simplified
        .is_none());
    assert!(!worstcase_bound(BoundMethod::Power, k, 9).valid);
    assert!(!worstcase_bound(BoundMethod::Power, 7, n).valid);
}

#[test]
fn bounds_decrease_in_n() {
    for m in [
        BoundMethod::Minimax,
        BoundMethod::ApproxMinimax,
        BoundMethod::ApproxMinimaxSharp,
        BoundMethod::Power,
    ] {
        let mut prev = f64::INFINITY;
        for n in (7..24).map(|b| 1u64 << b) {
            let b = worstcase_bound(m, 10_000, n);
            if b.valid {
                assert!(b.bound > 0.0 && b.bound < prev, "{}", m.name());
                prev = b.bound;
            } else {
                assert!(b.reason.is_some() && b.bound.is_nan());
            }
        }
        assert!(prev.is_finite());
    }
}

#[test]
fn search_stays_under_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = 1000;
    let q = Quantizer::midpoint(Compander::approx_minimax(k as u64).unwrap(), 256).unwrap();
    let r = adversarial_search(&q, k, 4000, &mut rng).unwrap();
    let b = worstcase_bound(BoundMethod::ApproxMinimax, k as u64, 256);
    assert!(r.kl <= b.bound, "{} > {}", r.kl, b.bound);
    assert!((r.x.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(r.evaluated <= 4000);

    let s = 1.0 / (k as f64).ln();
    let q = Quantizer::midpoint(Compander::power(s).unwrap(), 1024).unwrap();
    let r = adversarial_search(&q, k, 4000, &mut rng).unwrap();
    let b = worstcase_bound(BoundMethod::Power, k as u64, 1024);
    assert!(r.kl <= b.simplified.unwrap());

    // with uniform bins dust entries decode to N⁻¹/2, so a vanishing first bin is needed
    let q = Quantizer::midpoint(Compander::approx_minimax(50).unwrap(), 1 << 32).unwrap();
    let r = adversarial_search(&q, 50, 2000, &mut rng).unwrap();
    assert!(r.kl <= 1e-10, "{}", r.kl);
}

#[test]
fn search_needs_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = std::sync::Arc::new(klq::Density::uniform(0.0, 1.0).unwrap());
    let q = Quantizer::new(Compander::identity(), 16, klq::DecodeMode::Centroid(d)).unwrap();
    assert!(adversarial_search(&q, 10, 100, &mut rng).is_err());
    let q = Quantizer::midpoint(Compander::identity(), 16).unwrap();
    assert!(adversarial_search(&q, 1, 100, &mut rng).is_err());
}
