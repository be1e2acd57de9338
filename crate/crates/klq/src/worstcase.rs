//! Worst-case KL bounds under midpoint decoding and an adversarial search for
//! vectors that come close to them.

use std::f64::consts::E;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::kl_divergence;
use crate::quantizer::{DecodeMode, Quantizer};
use crate::simplex::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Minimax,
    ApproxMinimax,
    /// Approximate minimax with the sharper constant valid for `K ≥ 55`.
    ApproxMinimaxSharp,
    Power,
}

impl BoundMethod {
    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Minimax => "minimax",
            BoundMethod::ApproxMinimax => "approx_minimax",
            BoundMethod::ApproxMinimaxSharp => "approx_minimax_sharp",
            BoundMethod::Power => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseBound {
    pub method: BoundMethod,
    pub k: u64,
    pub n: u64,
    /// Bound on `max_x D_kl(x‖z)` in nats; `NaN` when the preconditions fail.
    pub bound: f64,
    pub err: f64,
    /// `e² N⁻² ln² K` for the power compander when `N ≥ e ln K`.
    pub simplified: Option<f64>,
    pub valid: bool,
    pub reason: Option<String>,
}

/// `8 ln(2√(c K ln K) + 1)`.
pub fn minimax_level_threshold(k: f64, c: f64) -> f64 {
    8.0 * (2.0 * (c * k * k.ln()).sqrt() + 1.0).ln()
}

fn invalid(method: BoundMethod, k: u64, n: u64, reason: String) -> WorstCaseBound {
    WorstCaseBound {
        method,
        k,
        n,
        bound: f64::NAN,
        err: f64::NAN,
        simplified: None,
        valid: false,
        reason: Some(reason),
    }
}

pub fn worstcase_bound(method: BoundMethod, k: u64, n: u64) -> WorstCaseBound {
    let kf = k as f64;
    let nf = n as f64;
    let lk = kf.ln();
    let base = lk * lk / (nf * nf);
    match method {
        BoundMethod::Minimax | BoundMethod::ApproxMinimax => {
            if k <= 4 {
                return invalid(method, k, n, format!("needs K > 4, got {k}"));
            }
            let need = minimax_level_threshold(kf, 1.0);
            if nf < need {
                return invalid(method, k, n, format!("needs N >= {need:.3}, got {n}"));
            }
            let err = 18.0 * lk.ln() / lk;
            WorstCaseBound {
                method,
                k,
                n,
                bound: (1.0 + err) * base,
                err,
                simplified: None,
                valid: true,
                reason: None,
            }
        }
        BoundMethod::ApproxMinimaxSharp => {
            if k < 55 {
                return invalid(method, k, n, format!("needs K >= 55, got {k}"));
            }
            let need = 6.0 * (2.0 * (0.5 * kf * lk).sqrt() + 1.0).ln();
            if nf <= need {
                return invalid(method, k, n, format!("needs N > {need:.3}, got {n}"));
            }
            let err = 6.0 * lk.ln() / lk;
            WorstCaseBound {
                method,
                k,
                n,
                bound: (1.0 + err) * base,
                err,
                simplified: None,
                valid: true,
                reason: None,
            }
        }
        BoundMethod::Power => {
            if k <= 7 {
                return invalid(method, k, n, format!("needs K > 7, got {k}"));
            }
            let half_e_lk = 0.5 * E * lk;
            if nf <= half_e_lk {
                return invalid(method, k, n, format!("needs N > {half_e_lk:.3}, got {n}"));
            }
            let err = half_e_lk / (nf - half_e_lk);
            let bound = (1.0 + err) * 0.5 * E * E * base;
            let simplified = (nf >= E * lk).then_some(E * E * base);
            WorstCaseBound {
                method,
                k,
                n,
                bound,
                err,
                simplified,
                valid: true,
                reason: None,
            }
        }
    }
}

/// Best vector found by [`adversarial_search`].
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub x: ProbVector,
    pub kl: f64,
    pub evaluated: usize,
}

fn evaluate(q: &Quantizer, x: &[f64], codes: &mut Vec<u64>, raw: &mut Vec<f64>) -> Result<f64> {
    let sum = q.quantize_into(x, codes, raw)?;
    let z: Vec<f64> = raw.iter().map(|y| y / sum).collect();
    kl_divergence(x, &z)
}

/// Puts `w` (summing below one) into a vector, the remainder in the last slot.
fn complete(mut w: Vec<f64>) -> Option<Vec<f64>> {
    let s: f64 = w.iter().sum();
    if !(s <= 1.0) {
        return None;
    }
    w.push(1.0 - s);
    Some(w)
}

/// Structured candidates plus random-restart hill climbing; returns the largest
/// KL seen. Uses `budget` evaluations in total.
pub fn adversarial_search<R: Rng + ?Sized>(
    q: &Quantizer,
    k: usize,
    budget: usize,
    rng: &mut R,
) -> Result<SearchResult> {
    if !matches!(q.decode_mode(), DecodeMode::Midpoint) {
        return Err(Error::Parameter(
            "adversarial search needs midpoint decoding".into(),
        ));
    }
    if k < 2 {
        return Err(Error::Parameter(format!("K must be at least 2, got {k}")));
    }
    let q = q.clone().cached()?;
    let levels = q.levels();
    let kf = k as f64;
    let mut candidates: Vec<Vec<f64>> = Vec::new();

    // lower bin edges just inside the half-open bins
    let edges: Vec<f64> = (1..=levels.min(4096))
        .map(|n| q.bin_interval(n).map(|b| b.0))
        .collect::<Result<_>>()?;
    let inside = |lo: f64| {
        if lo == 0.0 {
            f64::MIN_POSITIVE
        } else {
            lo * (1.0 + 1e-12)
        }
    };
    for &lo in edges.iter().filter(|&&lo| lo * (kf - 1.0) < 1.0) {
        candidates.extend(complete(vec![inside(lo); k - 1]));
    }
    for (i, &lo) in edges.iter().enumerate() {
        // edge-aligned mixtures of two neighbouring bins
        if let Some(&lo2) = edges.get(i + 1) {
            let half = (k - 1) / 2;
            let mut w = vec![inside(lo); half];
            w.extend(vec![inside(lo2); k - 1 - half]);
            candidates.extend(complete(w));
        }
    }
    // one-hot plus dust
    for &lo in edges.iter().take(64) {
        for frac in [1.0, 0.5, 0.1] {
            let d = inside(lo) * frac;
            if d > 0.0 && d * (kf - 1.0) < 1.0 {
                candidates.extend(complete(vec![d; k - 1]));
            }
        }
    }
    // geometric ladders
    for i in 1..=64 {
        let rho = 1.0 - (i as f64 / 65.0).powi(2);
        let w: Vec<f64> = (0..k).map(|j| rho.powi(j as i32)).collect();
        let s: f64 = w.iter().sum();
        candidates.push(w.into_iter().map(|v| v / s).collect());
    }
    candidates.truncate(budget / 2);

    let scored: Vec<(f64, usize)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<(f64, usize)> {
            let (mut c, mut r) = (Vec::new(), Vec::new());
            Ok((evaluate(&q, x, &mut c, &mut r)?, i))
        })
        .collect::<Result<_>>()?;
    let mut evaluated = scored.len();
    let mut order: Vec<(f64, usize)> = scored;
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best_kl, best_i) = order.first().copied().unwrap_or((0.0, usize::MAX));
    let mut best = if best_i == usize::MAX {
        vec![1.0 / kf; k]
    } else {
        candidates[best_i].clone()
    };

    // coordinate hill climbing: move mass between pairs of entries
    let mut codes = Vec::new();
    let mut raw = Vec::new();
    let starts: Vec<Vec<f64>> = order
        .iter()
        .take(4)
        .map(|&(_, i)| candidates[i].clone())
        .collect();
    let starts = if starts.is_empty() {
        vec![best.clone()]
    } else {
        starts
    };
    let per_start = budget.saturating_sub(evaluated) / starts.len();
    for start in starts {
        let mut x = start;
        let mut cur = evaluate(&q, &x, &mut codes, &mut raw)?;
        evaluated += 1;
        let mut step = 0.25;
        let mut used = 1;
        while used < per_start {
            let i = rng.gen_range(0..k);
            let j = rng.gen_range(0..k);
            if i == j || x[i] <= 0.0 {
                used += 1;
                evaluated += 1;
                continue;
            }
            let delta = x[i] * step * rng.gen::<f64>();
            let mut y = x.clone();
            y[i] -= delta;
            y[j] += delta;
            let v = evaluate(&q, &y, &mut codes, &mut raw)?;
            used += 1;
            evaluated += 1;
            if v > cur {
                x = y;
                cur = v;
            } else if used % 500 == 0 {
                step = (step * 0.7).max(1e-6);
            }
        }
        if cur > best_kl {
            best_kl = cur;
            best = x;
        }
    }
    // renormalize away drift from repeated transfers
    let s: f64 = best.iter().sum();
    let mut best: Vec<f64> = best.into_iter().map(|v| v / s).collect();
    best.shuffle(rng);
    Ok(SearchResult {
        x: ProbVector::new(best)?,
        kl: best_kl,
        evaluated,
    })
}
