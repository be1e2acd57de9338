//! Random priors over the simplex.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::constants::MaximinConstants;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::simplex::ProbVector;

/// Stratified draw: a random permutation `σ`, `U_k ~ Unif(((σ(k)−1)/m, σ(k)/m])`,
/// `W_k = F⁻¹(U_k)`. Exactly one draw lands in each quantile stratum.
pub fn sample_coupled<R: Rng + ?Sized>(p: &Density, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Parameter("need at least one coupled draw".into()));
    }
    let mut strata: Vec<usize> = (0..m).collect();
    strata.shuffle(rng);
    let mf = m as f64;
    strata
        .into_iter()
        .map(|s| {
            // (s + 1 - v)/m with v in [0,1) lies in (s/m, (s+1)/m]
            let v: f64 = rng.gen();
            let u = ((s as f64 + 1.0 - v) / mf).min(1.0);
            p.inverse_cdf(u)
        })
        .collect()
}

/// A draw from the hard prior: `K−1` coupled draws from the maximin density,
/// halved, completed by `1 − Σ`, then randomly permuted.
pub fn sample_hard_prior<R: Rng + ?Sized>(
    constants: &MaximinConstants,
    rng: &mut R,
) -> Result<ProbVector> {
    let k = constants.k as usize;
    if k < 5 {
        return Err(Error::Parameter(format!(
            "hard prior needs K >= 5, got {k}"
        )));
    }
    let p = Density::Maximin(*constants);
    let w = sample_coupled(&p, k - 1, rng)?;
    let mut x: Vec<f64> = w.into_iter().map(|v| 0.5 * v).collect();
    let s: f64 = x.iter().sum();
    x.push((1.0 - s).max(0.0));
    x.shuffle(rng);
    ProbVector::new(x)
}

/// Pairs `(u, 2/K − u)` with `u ~ Unif[0, 2/K]`; odd `K` fixes one entry at `1/K`.
pub fn uniform_bad_prior<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<ProbVector> {
    if k < 2 {
        return Err(Error::Parameter(format!("bad prior needs K >= 2, got {k}")));
    }
    let w = 2.0 / k as f64;
    let mut x = Vec::with_capacity(k);
    if k % 2 == 1 {
        x.push(1.0 / k as f64);
    }
    for _ in 0..k / 2 {
        let u = rng.gen::<f64>() * w;
        x.push(u);
        x.push(w - u);
    }
    x.shuffle(rng);
    ProbVector::new(x)
}

/// Uniform (Dirichlet(1,…,1)) draw from normalized unit exponentials.
pub fn sample_uniform_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<ProbVector> {
    if k < 2 {
        return Err(Error::Parameter(format!("simplex needs K >= 2, got {k}")));
    }
    let e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    ProbVector::new(e.into_iter().map(|v: f64| v / s).collect())
}

/// A symmetric prior over the simplex, with the single-letter marginal when known.
#[derive(Debug, Clone)]
pub enum Prior {
    UniformSimplex { k: usize },
    Hard { constants: MaximinConstants },
    UniformBad { k: usize },
}

impl Prior {
    pub fn alphabet_size(&self) -> usize {
        match self {
            Prior::UniformSimplex { k } | Prior::UniformBad { k } => *k,
            Prior::Hard { constants } => constants.k as usize,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Prior::UniformSimplex { k } => format!("uniform_simplex(K={k})"),
            Prior::Hard { constants } => format!("hard(K={})", constants.k),
            Prior::UniformBad { k } => format!("uniform_bad(K={k})"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ProbVector> {
        match self {
            Prior::UniformSimplex { k } => sample_uniform_simplex(*k, rng),
            Prior::Hard { constants } => sample_hard_prior(constants, rng),
            Prior::UniformBad { k } => uniform_bad_prior(*k, rng),
        }
    }

    /// Density of one coordinate.
    pub fn marginal(&self) -> Result<Density> {
        match self {
            Prior::UniformSimplex { k } => Density::beta(1.0, (*k - 1) as f64),
            // a mixture of p**(x) = 2 p*(2x) and the law of the completing coordinate
            Prior::Hard { .. } => Err(Error::Parameter(
                "hard prior marginal has no closed form".into(),
            )),
            Prior::UniformBad { k } => {
                if k % 2 == 1 {
                    return Err(Error::Parameter(
                        "odd-K bad prior has an atom at 1/K".into(),
                    ));
                }
                Density::uniform(0.0, 2.0 / *k as f64)
            }
        }
    }
}
