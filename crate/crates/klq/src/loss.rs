//! KL losses: exact, single-letter, asymptotic and Monte Carlo.

use std::f64::consts::LN_2;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::compander::Compander;
use crate::constants::MaximinConstants;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::numeric::{self, ln_beta, Tolerance};
use crate::quantizer::{DecodeMode, Quantizer};
use crate::sampling::Prior;

/// `Σ_{x_i>0} x_i ln(x_i/z_i)` in nats.
pub fn kl_divergence(x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Parameter(format!(
            "length mismatch {} vs {}",
            x.len(),
            z.len()
        )));
    }
    let mut d = 0.0;
    for (i, (&xi, &zi)) in x.iter().zip(z).enumerate() {
        if xi > 0.0 {
            if zi <= 0.0 {
                return Err(Error::InfiniteDivergence { index: i });
            }
            d += xi * (xi / zi).ln();
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AltMetric {
    L1,
    L2Sq,
}

pub fn alt_loss(metric: AltMetric, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Parameter(format!(
            "length mismatch {} vs {}",
            x.len(),
            z.len()
        )));
    }
    let it = x.iter().zip(z).map(|(a, b)| a - b);
    Ok(match metric {
        AltMetric::L1 => it.map(f64::abs).sum(),
        AltMetric::L2Sq => it.map(|d| d * d).sum(),
    })
}

/// `x ln(x/c) − x + c ≥ 0`, evaluated without cancellation when `x ≈ c`.
pub fn kl_excess(x: f64, c: f64) -> f64 {
    if x <= 0.0 {
        return c;
    }
    let u = (x - c) / c;
    if u.abs() < 0.01 {
        let series = 0.5
            - u * (1.0 / 6.0
                - u * (1.0 / 12.0 - u * (1.0 / 20.0 - u * (1.0 / 30.0 - u * (1.0 / 42.0)))));
        c * u * u * series
    } else {
        x * (x / c).ln() - x + c
    }
}

fn bin_tol() -> Tolerance {
    Tolerance {
        abs: 1e-300,
        rel: 1e-10,
        max_intervals: 2000,
    }
}

/// Single-letter loss `E[X ln(X/ỹ(X))]` under centroid decoding.
///
/// Each bin contributes `∫ p(x)(x ln(x/c) − x + c) dx` with `c` the bin centroid; the
/// subtracted linear term integrates to zero, and the remaining integrand is
/// nonnegative and second order in the bin width.
pub fn single_letter_loss(p: &Density, f: &Compander, n: u64) -> Result<f64> {
    let q = Quantizer::midpoint(f.clone(), n)?;
    let (slo, shi) = p.support();
    let levels = n;
    let per_bin: Vec<f64> = (1..=levels)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let (lo, hi) = q.bin_interval(i)?;
            if hi <= slo || lo >= shi {
                return Ok(0.0);
            }
            bin_loss(p, lo, hi).map_err(|e| Error::Numerical(format!("bin {i} ({lo}, {hi}]: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_bin.iter().sum())
}

fn bin_loss(p: &Density, lo: f64, hi: f64) -> Result<f64> {
    let mass = p
        .integrate_tol(
            |_| 1.0,
            lo,
            hi,
            Tolerance {
                rel: 1e-12,
                ..bin_tol()
            },
        )?
        .value;
    if !(mass >= 1e-300) {
        return Ok(0.0);
    }
    let first = p
        .integrate_tol(
            |x| x - lo,
            lo,
            hi,
            Tolerance {
                rel: 1e-12,
                ..bin_tol()
            },
        )?
        .value;
    let c = (lo + first / mass).clamp(lo, hi);
    if c <= 0.0 {
        return Ok(0.0);
    }
    Ok(p.integrate_tol(|x| kl_excess(x, c), lo, hi, bin_tol())?
        .value
        .max(0.0))
}

/// Monte Carlo estimate of the single-letter loss with the quantizer's own decoder;
/// returns `(mean, standard error)`. Uses the same second-order integrand as
/// [`single_letter_loss`], which has the same expectation under centroid decoding.
pub fn single_letter_loss_mc<R: Rng + ?Sized>(
    p: &Density,
    q: &Quantizer,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::Parameter("need at least two samples".into()));
    }
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = p.inverse_cdf(rng.gen::<f64>())?;
        let y = q.decode(q.encode(x)?)?;
        vals.push(if x > 0.0 { kl_excess(x, y) } else { 0.0 });
    }
    Ok(mean_and_stderr(&vals))
}

pub fn mean_and_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `L†(p, f) = (1/24) ∫ p(x) f′(x)^{-2} x^{-1} dx`.
///
/// Near 0 the integral is taken over geometric chunks; a chunk sequence that stops
/// shrinking is reported as [`Error::Divergent`].
pub fn asymptotic_loss(p: &Density, f: &Compander) -> Result<f64> {
    let (lo, hi) = p.support();
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-13,
        max_intervals: 6000,
    };
    let g = |x: f64| f.loss_weight(x);
    if lo > 0.0 {
        return Ok(p.integrate_tol(g, lo, hi, tol)?.value / 24.0);
    }
    let mut cut = hi * 1e-6;
    let mut total = p.integrate_tol(g, cut, hi, tol)?.value;
    let mut prev = f64::INFINITY;
    let mut stalls = 0;
    loop {
        let next = cut * 1e-6;
        if next < 1e-300 {
            return Err(Error::Divergent(format!(
                "L† integrand not integrable at 0 for {}",
                p.label()
            )));
        }
        let (a, b) = (next.ln(), cut.ln());
        // chunk in the log variable, where power laws are smooth
        let chunk = numeric::integrate(
            |v| {
                let x = v.exp();
                g(x) * p.pdf(x) * x
            },
            a,
            b,
            tol,
        )?
        .value;
        if !chunk.is_finite() {
            return Err(Error::Divergent(format!(
                "non-finite L† chunk for {}",
                p.label()
            )));
        }
        total += chunk;
        if chunk <= 1e-15 * total {
            break;
        }
        if chunk >= 0.95 * prev {
            stalls += 1;
            if stalls >= 4 {
                return Err(Error::Divergent(format!(
                    "L† integral diverges at 0 for {}",
                    p.label()
                )));
            }
        } else {
            stalls = 0;
        }
        prev = chunk;
        cut = next;
    }
    Ok(total / 24.0)
}

/// `(1/24)(2 asinh(√(c_K K ln K))/√b_K)³`.
pub fn minimax_saddle_loss(c: &MaximinConstants) -> f64 {
    c.phi_one().powi(3) / 24.0
}

/// `(1/24) s^{-2} K^{2s−1}`, the power compander's loss at a point mass at `1/K`.
pub fn power_sup_loss(k: u64, s: f64) -> f64 {
    (k as f64).powf(2.0 * s - 1.0) / (24.0 * s * s)
}

/// `L†` of the beta compander against its own Dirichlet marginal:
/// `(1/24) B((α+1)/3, ((K−1)α+2)/3)³ / B(α, (K−1)α)`.
pub fn beta_compander_loss(k: u64, alpha: f64) -> f64 {
    let kf = k as f64;
    let lb = 3.0 * ln_beta((alpha + 1.0) / 3.0, ((kf - 1.0) * alpha + 2.0) / 3.0)
        - ln_beta(alpha, (kf - 1.0) * alpha);
    lb.exp() / 24.0
}

/// `N² L̃(p, f, N)` for each `N`.
pub fn convergence_probe(p: &Density, f: &Compander, ns: &[u64]) -> Result<Vec<f64>> {
    if ns.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("N list must be ascending".into()));
    }
    ns.iter()
        .map(|&n| Ok((n as f64) * (n as f64) * single_letter_loss(p, f, n)?))
        .collect()
}

/// The compander with `f′ ∝ (p(x)/x)^{1/3}` and its loss `(1/24)(∫(p/x)^{1/3})³`.
///
/// `f_p` is tabulated on an adaptively refined grid (cubic Hermite with exact node
/// slopes, midpoint error below `1e-10`) and carries the exact derivative.
pub fn optimal_compander(p: &Density) -> Result<(Compander, f64)> {
    let p = Arc::new(p.clone());
    let (lo, hi) = p.support();
    let m = p.singular_order().max(3);
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-14,
        max_intervals: 4000,
    };
    let pg = p.clone();
    let g = move |x: f64| if x > 0.0 { (pg.pdf(x) / x).cbrt() } else { 0.0 };
    let seg = |a: f64, b: f64| -> Result<f64> {
        Ok(numeric::integrate_range(&g, a, b, if a == 0.0 { m } else { 1 }, tol)?.value)
    };
    let z = seg(lo, hi)?;
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Divergent(format!(
            "normalizer of (p/x)^(1/3) is {z} for {}",
            p.label()
        )));
    }
    let loss = z * z * z / 24.0;

    let mut nodes: Vec<f64> = vec![lo, hi];
    if lo == 0.0 {
        for j in 1..=64 {
            nodes.push(hi * 0.5f64.powi(j));
        }
    }
    for j in 1..16 {
        nodes.push(lo + (hi - lo) * j as f64 / 16.0);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();

    let build = |nodes: &[f64], cum: &[f64]| -> Result<Compander> {
        let mut xs = Vec::with_capacity(nodes.len() + 2);
        let mut ys = Vec::with_capacity(nodes.len() + 2);
        if lo > 0.0 {
            xs.push(0.0);
            ys.push(0.0);
        }
        for (x, c) in nodes.iter().zip(cum) {
            xs.push(*x);
            ys.push((c / z).min(1.0));
        }
        *ys.last_mut().unwrap() = 1.0;
        if hi < 1.0 {
            xs.push(1.0);
            ys.push(1.0);
        }
        let pd = p.clone();
        let deriv = move |x: f64| {
            if x > 0.0 {
                (pd.pdf(x) / x).cbrt() / z
            } else {
                f64::INFINITY
            }
        };
        let slopes = xs.iter().map(|&x| deriv(x)).collect();
        Compander::tabulated_hermite(xs, ys, slopes, Some(Arc::new(deriv)))
    };

    for _round in 0..60 {
        let pieces: Vec<f64> = nodes
            .par_windows(2)
            .map(|w| seg(w[0], w[1]))
            .collect::<Result<Vec<f64>>>()?;
        let mut cum = Vec::with_capacity(nodes.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for piece in &pieces {
            acc += piece;
            cum.push(acc);
        }
        let f = build(&nodes, &cum)?;
        let splits: Vec<Option<f64>> = nodes
            .par_windows(2)
            .enumerate()
            .map(|(i, w)| -> Result<Option<f64>> {
                let mid = 0.5 * (w[0] + w[1]);
                if mid <= w[0] || mid >= w[1] {
                    return Ok(None);
                }
                let exact = (cum[i] + seg(w[0], mid)?) / z;
                let err = (f.forward(mid) - exact).abs();
                Ok(if err > 1e-10 { Some(mid) } else { None })
            })
            .collect::<Result<Vec<_>>>()?;
        let new: Vec<f64> = splits.into_iter().flatten().collect();
        if new.is_empty() {
            return Ok((f, loss));
        }
        if nodes.len() + new.len() > 2_000_000 {
            return Err(Error::Numerical(
                "optimal compander grid did not converge".into(),
            ));
        }
        nodes.extend(new);
        nodes.sort_by(f64::total_cmp);
    }
    Err(Error::Numerical(
        "optimal compander grid did not converge".into(),
    ))
}

/// Aggregated Monte Carlo loss for one method and setting.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub method: String,
    pub k: usize,
    pub n: u64,
    pub bits: f64,
    /// Mean `D_kl(x‖z)` in nats.
    pub nats: f64,
    pub bits_per_entry: f64,
    /// Mean un-normalized loss `Σ x_i ln(x_i/y_i)`.
    pub raw_loss: f64,
    pub trials: usize,
    pub stderr: f64,
    pub infinite_events: usize,
}

impl LossReport {
    pub fn new(
        method: &str,
        k: usize,
        n: u64,
        nats: f64,
        raw_loss: f64,
        trials: usize,
        stderr: f64,
    ) -> Self {
        LossReport {
            method: method.to_string(),
            k,
            n,
            bits: (n as f64).log2(),
            nats,
            bits_per_entry: nats / (k as f64 * LN_2),
            raw_loss,
            trials,
            stderr,
            infinite_events: 0,
        }
    }

    /// Mean loss in bits for the whole vector.
    pub fn total_bits(&self) -> f64 {
        self.nats / LN_2
    }
}

/// A per-vector quantizer: compander codes or a float baseline.
#[derive(Debug, Clone)]
pub enum VectorCodec {
    Compander(Quantizer),
    Float(crate::float_format::FloatFormat),
}

impl VectorCodec {
    /// Raw reconstruction of `x` into `raw`.
    pub fn reconstruct(&self, x: &[f64], codes: &mut Vec<u64>, raw: &mut Vec<f64>) -> Result<()> {
        match self {
            VectorCodec::Compander(q) => {
                q.quantize_into(x, codes, raw)?;
            }
            VectorCodec::Float(fmt) => {
                raw.clear();
                for &v in x {
                    raw.push(fmt.roundtrip(v)?);
                }
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> u64 {
        match self {
            VectorCodec::Compander(q) => q.levels(),
            VectorCodec::Float(f) => 1u64 << f.bits(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            VectorCodec::Compander(q) => match q.decode_mode() {
                DecodeMode::Midpoint => q.compander().family().to_string(),
                DecodeMode::Centroid(_) => format!("{}+centroid", q.compander().family()),
            },
            VectorCodec::Float(f) => f.name().to_string(),
        }
    }
}

/// `(normalized KL, raw loss)` of one vector, or the index of an infinite term.
pub fn vector_losses(
    codec: &VectorCodec,
    x: &[f64],
    codes: &mut Vec<u64>,
    raw: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    codec.reconstruct(x, codes, raw)?;
    let sum = neumaier_sum(raw.iter().copied());
    let sum_x = neumaier_sum(x.iter().copied());
    // Σ x ln(x/z) = Σ (x ln(x/z) − x + z) + Σx − Σz, with nonnegative terms
    let mut kl = 0.0;
    let mut raw_excess = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(raw.iter()).enumerate() {
        if xi > 0.0 {
            if yi <= 0.0 {
                return Err(Error::InfiniteDivergence { index: i });
            }
            kl += kl_excess(xi, yi / sum);
            raw_excess += kl_excess(xi, yi);
        } else {
            kl += yi / sum;
            raw_excess += yi;
        }
    }
    let sum_z = neumaier_sum(raw.iter().map(|y| y / sum));
    Ok(((kl + (sum_x - sum_z)).max(0.0), raw_excess + (sum_x - sum)))
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

const TRIALS_PER_STREAM: usize = 16;

/// Monte Carlo `E[D_kl(x‖z)]` over `prior`. Trials run on independent ChaCha
/// streams seeded from `rng`, so the result depends only on the seed.
pub fn expected_loss_mc<R: Rng + ?Sized>(
    prior: &Prior,
    codec: &VectorCodec,
    trials: usize,
    rng: &mut R,
) -> Result<LossReport> {
    expected_loss_with(
        |r: &mut ChaCha8Rng| prior.sample(r).map(|v| v.into_inner()),
        prior.alphabet_size(),
        codec,
        trials,
        rng,
    )
}

/// As [`expected_loss_mc`] for an arbitrary sampler closure.
pub fn expected_loss_with<S, R>(
    sampler: S,
    k: usize,
    codec: &VectorCodec,
    trials: usize,
    rng: &mut R,
) -> Result<LossReport>
where
    S: Fn(&mut ChaCha8Rng) -> Result<Vec<f64>> + Sync,
    R: Rng + ?Sized,
{
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let seed: u64 = rng.gen();
    let streams = trials.div_ceil(TRIALS_PER_STREAM);
    let per_stream: Vec<Vec<Option<(f64, f64)>>> = (0..streams)
        .into_par_iter()
        .map(|s| -> Result<Vec<Option<(f64, f64)>>> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s as u64);
            let count = TRIALS_PER_STREAM.min(trials - s * TRIALS_PER_STREAM);
            let mut codes = Vec::new();
            let mut raw = Vec::new();
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let x = sampler(&mut r)?;
                match vector_losses(codec, &x, &mut codes, &mut raw) {
                    Ok(v) => out.push(Some(v)),
                    Err(Error::InfiniteDivergence { .. }) => out.push(None),
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<Option<(f64, f64)>> = per_stream.into_iter().flatten().collect();
    let finite: Vec<(f64, f64)> = all.iter().flatten().copied().collect();
    let infinite = all.len() - finite.len();
    let kls: Vec<f64> = finite.iter().map(|v| v.0).collect();
    let (nats, stderr) = if kls.is_empty() {
        (f64::INFINITY, 0.0)
    } else {
        mean_and_stderr(&kls)
    };
    let raw_loss = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().map(|v| v.1).sum::<f64>() / finite.len() as f64
    };
    let mut report = LossReport::new(
        &codec.label(),
        k,
        codec.levels(),
        nats,
        raw_loss,
        trials,
        stderr,
    );
    report.infinite_events = infinite;
    Ok(report)
}
