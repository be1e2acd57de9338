//! Information distillation on finite joint distributions.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::loss::kl_divergence;
use crate::quantizer::Quantizer;
use crate::sampling::sample_uniform_simplex;
use crate::worstcase::minimax_level_threshold;

/// Tolerance on the total mass of a joint distribution.
pub const JOINT_SUM_TOLERANCE: f64 = 1e-12;
/// Columns closer than this in max-norm are merged by [`JointDistribution::pushforward_prior`].
pub const MERGE_TOLERANCE: f64 = 1e-12;
/// Largest labeling count [`brute_force_distiller`] accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// `P_{A,B}` on `[K] × [|B|]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    k: usize,
    nb: usize,
    p: Vec<f64>,
    pa: Vec<f64>,
    pb: Vec<f64>,
}

/// One point of the push-forward prior: a conditional `x(b)` and its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub mass: f64,
    /// Columns of the joint that map to this atom.
    pub columns: Vec<usize>,
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

impl JointDistribution {
    /// From a row-major `K × |B|` matrix (`rows[a][b]`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows[0].is_empty() {
            return Err(Error::EmptyDistribution);
        }
        let nb = rows[0].len();
        if rows.iter().any(|r| r.len() != nb) {
            return Err(Error::Parameter("ragged joint matrix".into()));
        }
        let p: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_flat(k, nb, p)
    }

    pub fn from_flat(k: usize, nb: usize, p: Vec<f64>) -> Result<Self> {
        if k == 0 || nb == 0 {
            return Err(Error::EmptyDistribution);
        }
        if p.len() != k * nb {
            return Err(Error::Parameter(format!(
                "expected {} entries, got {}",
                k * nb,
                p.len()
            )));
        }
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(
                "joint probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > JOINT_SUM_TOLERANCE {
            return Err(Error::Domain(format!("joint mass is {total}, not 1")));
        }
        let mut pa = vec![0.0; k];
        let mut pb = vec![0.0; nb];
        for a in 0..k {
            for b in 0..nb {
                pa[a] += p[a * nb + b];
                pb[b] += p[a * nb + b];
            }
        }
        Ok(JointDistribution { k, nb, p, pa, pb })
    }

    /// A joint drawn uniformly from the `K·|B|`-simplex.
    pub fn random<R: Rng + ?Sized>(k: usize, nb: usize, rng: &mut R) -> Result<Self> {
        let flat = sample_uniform_simplex(k * nb, rng)?.into_inner();
        let total: f64 = flat.iter().sum();
        Self::from_flat(k, nb, flat.into_iter().map(|v| v / total).collect())
    }

    pub fn alphabet_a(&self) -> usize {
        self.k
    }

    pub fn alphabet_b(&self) -> usize {
        self.nb
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.p[a * self.nb + b]
    }

    pub fn marginal_a(&self) -> &[f64] {
        &self.pa
    }

    pub fn marginal_b(&self) -> &[f64] {
        &self.pb
    }

    /// `x(b) = P_{A|B=b}`, or `None` when `P_B(b) = 0`.
    pub fn column(&self, b: usize) -> Option<Vec<f64>> {
        let m = self.pb[b];
        (m > 0.0).then(|| (0..self.k).map(|a| self.prob(a, b) / m).collect())
    }

    pub fn mutual_information(&self) -> f64 {
        let mut i = 0.0;
        for a in 0..self.k {
            for b in 0..self.nb {
                let v = self.prob(a, b);
                if v > 0.0 {
                    i += v * (v / (self.pa[a] * self.pb[b])).ln();
                }
            }
        }
        i.max(0.0)
    }

    /// `H(A) − H(A|B)`, an independent route to `I(A;B)`.
    pub fn mutual_information_by_entropy(&self) -> f64 {
        let h_a: f64 = -self.pa.iter().map(|&v| xlogx(v)).sum::<f64>();
        let mut h_a_given_b = 0.0;
        for b in 0..self.nb {
            if let Some(x) = self.column(b) {
                h_a_given_b -= self.pb[b] * x.iter().map(|&v| xlogx(v)).sum::<f64>();
            }
        }
        h_a - h_a_given_b
    }

    /// Distinct conditionals `x(b)` with their summed mass.
    pub fn pushforward_prior(&self) -> Vec<Atom> {
        let mut atoms: Vec<Atom> = Vec::new();
        for b in 0..self.nb {
            let Some(x) = self.column(b) else { continue };
            let found = atoms.iter_mut().find(|at| {
                at.x.iter()
                    .zip(&x)
                    .all(|(u, v)| (u - v).abs() <= MERGE_TOLERANCE)
            });
            match found {
                Some(at) => {
                    at.mass += self.pb[b];
                    at.columns.push(b);
                }
                None => atoms.push(Atom {
                    x,
                    mass: self.pb[b],
                    columns: vec![b],
                }),
            }
        }
        atoms
    }

    /// `I(A; h(B))` for a labeling of the columns.
    pub fn labeled_information(&self, labels: &[usize]) -> Result<f64> {
        if labels.len() != self.nb {
            return Err(Error::Parameter(format!(
                "need {} labels, got {}",
                self.nb,
                labels.len()
            )));
        }
        let mut groups: HashMap<usize, Vec<f64>> = HashMap::new();
        for (b, &l) in labels.iter().enumerate() {
            let g = groups.entry(l).or_insert_with(|| vec![0.0; self.k]);
            for (a, slot) in g.iter_mut().enumerate() {
                *slot += self.prob(a, b);
            }
        }
        let mut i = 0.0;
        for g in groups.values() {
            let m: f64 = g.iter().sum();
            for (a, &v) in g.iter().enumerate() {
                if v > 0.0 {
                    i += v * (v / (self.pa[a] * m)).ln();
                }
            }
        }
        Ok(i.max(0.0))
    }

    /// `I(A;B) − I(A;h(B))`.
    pub fn information_loss(&self, labels: &[usize]) -> Result<f64> {
        Ok((self.mutual_information() - self.labeled_information(labels)?).max(0.0))
    }

    /// `Σ_b P_B(b) D(x(b) ‖ z_cell(b))` with `z_cell` the conditional mean of the cell.
    pub fn cell_kl(&self, labels: &[usize]) -> Result<f64> {
        if labels.len() != self.nb {
            return Err(Error::Parameter(format!(
                "need {} labels, got {}",
                self.nb,
                labels.len()
            )));
        }
        let mut cells: HashMap<usize, (Vec<f64>, f64)> = HashMap::new();
        for (b, &l) in labels.iter().enumerate() {
            let e = cells.entry(l).or_insert_with(|| (vec![0.0; self.k], 0.0));
            for a in 0..self.k {
                e.0[a] += self.prob(a, b);
            }
            e.1 += self.pb[b];
        }
        let mut total = 0.0;
        for (b, &l) in labels.iter().enumerate() {
            let Some(x) = self.column(b) else { continue };
            let (sum, mass) = &cells[&l];
            let z: Vec<f64> = sum.iter().map(|v| v / mass).collect();
            total += self.pb[b] * kl_divergence(&x, &z)?;
        }
        Ok(total)
    }
}

/// Result of [`distiller_from_quantizer`].
#[derive(Debug, Clone)]
pub struct Distiller {
    /// Label of each column of `B`; columns with `P_B(b) = 0` get label 0.
    pub labels: Vec<usize>,
    /// Number of occupied cells.
    pub cells: usize,
    /// `I(A;B) − I(A;h(B))`.
    pub info_loss: f64,
    /// Expected KL to the cell conditional means; equal to `info_loss`.
    pub cell_kl: f64,
    /// Expected KL of the quantizer's own normalized reconstruction.
    pub quantizer_kl: f64,
}

/// Labels every column by the code tuple of its conditional `x(b)`.
pub fn distiller_from_quantizer(
    j: &JointDistribution,
    q: &Quantizer,
    max_labels: usize,
) -> Result<Distiller> {
    let mut keys: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut labels = vec![0; j.alphabet_b()];
    let mut quantizer_kl = 0.0;
    for (b, label) in labels.iter_mut().enumerate() {
        let Some(x) = j.column(b) else { continue };
        let mut codes = Vec::new();
        let mut raw = Vec::new();
        let sum = q.quantize_into(&x, &mut codes, &mut raw)?;
        let z: Vec<f64> = raw.iter().map(|y| y / sum).collect();
        quantizer_kl += j.marginal_b()[b] * kl_divergence(&x, &z)?;
        let next = keys.len();
        *label = *keys.entry(codes).or_insert(next);
    }
    let cells = keys.len();
    if cells > max_labels {
        return Err(Error::TooLarge(format!(
            "quantizer occupies {cells} cells, more than M = {max_labels}"
        )));
    }
    let info_loss = j.information_loss(&labels)?;
    let cell_kl = j.cell_kl(&labels)?;
    let gap = (info_loss - cell_kl).abs();
    if gap > 1e-10 * info_loss.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "information loss {info_loss} differs from cell KL {cell_kl}"
        )));
    }
    Ok(Distiller {
        labels,
        cells,
        info_loss,
        cell_kl,
        quantizer_kl,
    })
}

/// Visits every partition of `n` items into at most `m` blocks as a
/// restricted growth string, in parallel over short prefixes.
fn for_each_partition<T, F, C>(n: usize, m: usize, eval: F, better: C) -> Option<(Vec<usize>, T)>
where
    T: Send + Copy,
    F: Fn(&[usize]) -> T + Sync,
    C: Fn(&T, &T) -> bool + Sync,
{
    fn rec<T: Copy, F: Fn(&[usize]) -> T, C: Fn(&T, &T) -> bool>(
        s: &mut Vec<usize>,
        used: usize,
        n: usize,
        m: usize,
        eval: &F,
        better: &C,
        best: &mut Option<(Vec<usize>, T)>,
    ) {
        if s.len() == n {
            let v = eval(s);
            if best.as_ref().is_none_or(|(_, b)| better(&v, b)) {
                *best = Some((s.clone(), v));
            }
            return;
        }
        for l in 0..=used.min(m - 1) {
            s.push(l);
            rec(s, used.max(l + 1), n, m, eval, better, best);
            s.pop();
        }
    }
    if n == 0 || m == 0 {
        return None;
    }
    // prefixes of length up to 4 form independent subtrees
    let depth = n.min(4);
    let mut prefixes: Vec<(Vec<usize>, usize)> = vec![(vec![0], 1)];
    while prefixes[0].0.len() < depth {
        prefixes = prefixes
            .into_iter()
            .flat_map(|(p, used)| {
                (0..=used.min(m - 1)).map(move |l| {
                    let mut q = p.clone();
                    q.push(l);
                    (q, used.max(l + 1))
                })
            })
            .collect();
    }
    let results: Vec<Option<(Vec<usize>, T)>> = prefixes
        .into_par_iter()
        .map(|(mut p, used)| {
            let mut best = None;
            rec(&mut p, used, n, m, &eval, &better, &mut best);
            best
        })
        .collect();
    let mut best: Option<(Vec<usize>, T)> = None;
    for r in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, b)| better(&r.1, b)) {
            best = Some(r);
        }
    }
    best
}

fn check_size(distinct: usize, m: usize) -> Result<()> {
    let count = (m as f64).powi(distinct as i32);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(format!(
            "{m}^{distinct} labelings exceed {BRUTE_FORCE_LIMIT}"
        )));
    }
    Ok(())
}

/// Minimum information loss over deterministic labelings into at most `m` labels.
pub fn brute_force_distiller(j: &JointDistribution, m: usize) -> Result<(Vec<usize>, f64)> {
    if m == 0 {
        return Err(Error::Parameter("M must be positive".into()));
    }
    let atoms = j.pushforward_prior();
    check_size(atoms.len(), m)?;
    let to_columns = |part: &[usize]| {
        let mut labels = vec![0; j.alphabet_b()];
        for (atom, &l) in atoms.iter().zip(part) {
            for &b in &atom.columns {
                labels[b] = l;
            }
        }
        labels
    };
    let best = for_each_partition(
        atoms.len(),
        m,
        |part| {
            j.information_loss(&to_columns(part))
                .unwrap_or(f64::INFINITY)
        },
        |a, b| a < b,
    );
    match best {
        Some((part, loss)) => Ok((to_columns(&part), loss)),
        None => Ok((vec![0; j.alphabet_b()], 0.0)),
    }
}

/// Minimum over cell partitions of the push-forward prior of `E D(x ‖ cell mean)`.
pub fn brute_force_quantizer_loss(j: &JointDistribution, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Parameter("M must be positive".into()));
    }
    let atoms = j.pushforward_prior();
    check_size(atoms.len(), m)?;
    let k = j.alphabet_a();
    let eval = |part: &[usize]| -> f64 {
        let mut means = vec![vec![0.0; k]; m];
        let mut mass = vec![0.0; m];
        for (atom, &l) in atoms.iter().zip(part) {
            mass[l] += atom.mass;
            for (s, v) in means[l].iter_mut().zip(&atom.x) {
                *s += atom.mass * v;
            }
        }
        let mut total = 0.0;
        for (atom, &l) in atoms.iter().zip(part) {
            let z: Vec<f64> = means[l].iter().map(|s| s / mass[l]).collect();
            total += atom.mass * kl_divergence(&atom.x, &z).unwrap_or(f64::INFINITY);
        }
        total
    };
    Ok(for_each_partition(atoms.len(), m, eval, |a, b| a < b)
        .map(|r| r.1)
        .unwrap_or(0.0))
}

/// The three degrading-cost upper bounds for alphabet `K` and `M` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradingBounds {
    /// `(1 + 18 ln ln K/ln K) M^{−2/K} ln² K`, when `M^{1/K} > ⌈8 ln(2√(K ln K)+1)⌉`.
    pub compander: Option<f64>,
    /// `1268 (K−1) M^{−2/(K−1)}`, when `M^{1/(K−1)} ≥ 4`.
    pub linear: Option<f64>,
    /// `800 ln K · M^{−2/(K−1)}`.
    pub logarithmic: f64,
}

impl DegradingBounds {
    /// Name of the smallest available bound.
    pub fn smallest(&self) -> &'static str {
        let mut best = ("logarithmic", self.logarithmic);
        if let Some(v) = self.linear {
            if v < best.1 {
                best = ("linear", v);
            }
        }
        if let Some(v) = self.compander {
            if v < best.1 {
                best = ("compander", v);
            }
        }
        best.0
    }
}

/// `M` may be astronomically large, so it is taken as a float.
pub fn degrading_cost_bounds(k: u64, m: f64) -> Result<DegradingBounds> {
    if k < 5 {
        return Err(Error::Parameter(format!("K must be at least 5, got {k}")));
    }
    if !(m >= 1.0) {
        return Err(Error::Parameter(format!("M must be at least 1, got {m}")));
    }
    let kf = k as f64;
    let lk = kf.ln();
    let lm = m.ln();
    let root_k = (lm / kf).exp();
    let root_k1 = (lm / (kf - 1.0)).exp();
    let need = minimax_level_threshold(kf, 1.0).ceil();
    let compander =
        (root_k > need).then(|| (1.0 + 18.0 * lk.ln() / lk) * (-2.0 * lm / kf).exp() * lk * lk);
    let decay = (-2.0 * lm / (kf - 1.0)).exp();
    let linear = (root_k1 >= 4.0).then_some(1268.0 * (kf - 1.0) * decay);
    Ok(DegradingBounds {
        compander,
        linear,
        logarithmic: 800.0 * lk * decay,
    })
}
