//! Scalar quantization of simplex entries through a compander.

use std::sync::Arc;

use crate::compander::Compander;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::simplex::ProbVector;

/// Largest `N` for which decode values and bin edges are tabulated by [`Quantizer::cached`].
pub const MAX_CACHED_LEVELS: u64 = 1 << 22;

#[derive(Debug, Clone)]
pub enum DecodeMode {
    Midpoint,
    /// Conditional mean of the bin under the attached density.
    Centroid(Arc<Density>),
}

impl DecodeMode {
    pub fn label(&self) -> &'static str {
        match self {
            DecodeMode::Midpoint => "midpoint",
            DecodeMode::Centroid(_) => "centroid",
        }
    }
}

#[derive(Debug)]
struct Tables {
    edges: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Quantizer {
    compander: Compander,
    levels: u64,
    decode: DecodeMode,
    zero_bin: bool,
    tables: Option<Arc<Tables>>,
}

/// Output of [`Quantizer::quantize_vector`].
#[derive(Debug, Clone)]
pub struct Quantized {
    pub codes: Vec<u64>,
    pub raw: Vec<f64>,
    pub z: ProbVector,
}

impl Quantizer {
    /// Quantizer with the zero bin enabled.
    pub fn new(compander: Compander, levels: u64, decode: DecodeMode) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Parameter("granularity N must be positive".into()));
        }
        Ok(Quantizer {
            compander,
            levels,
            decode,
            zero_bin: true,
            tables: None,
        })
    }

    pub fn midpoint(compander: Compander, levels: u64) -> Result<Self> {
        Self::new(compander, levels, DecodeMode::Midpoint)
    }

    pub fn with_zero_bin(mut self, zero_bin: bool) -> Self {
        self.zero_bin = zero_bin;
        self
    }

    /// Precomputes all bin edges and decode values. No-op above [`MAX_CACHED_LEVELS`].
    pub fn cached(mut self) -> Result<Self> {
        if self.levels > MAX_CACHED_LEVELS || self.tables.is_some() {
            return Ok(self);
        }
        let n = self.levels as usize;
        let mut edges = Vec::with_capacity(n + 1);
        for i in 0..=n {
            edges.push(self.edge(i as u64)?);
        }
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        for i in 1..=n {
            values.push(self.decode_bin(edges[i - 1], edges[i])?);
        }
        self.tables = Some(Arc::new(Tables { edges, values }));
        Ok(self)
    }

    pub fn compander(&self) -> &Compander {
        &self.compander
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    pub fn decode_mode(&self) -> &DecodeMode {
        &self.decode
    }

    pub fn zero_bin(&self) -> bool {
        self.zero_bin
    }

    /// `f⁻¹(i/N)`.
    fn edge(&self, i: u64) -> Result<f64> {
        if let Some(t) = &self.tables {
            return Ok(t.edges[i as usize]);
        }
        if i == 0 {
            return self.compander.inverse(0.0);
        }
        if i == self.levels {
            return Ok(1.0);
        }
        self.compander.inverse(i as f64 / self.levels as f64)
    }

    pub fn encode(&self, x: f64) -> Result<u64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("cannot encode {x}: outside [0,1]")));
        }
        if x == 0.0 && self.zero_bin {
            return Ok(0);
        }
        let y = self.compander.forward(x);
        if !y.is_finite() {
            return Err(Error::Numerical(format!("compander returned {y} at {x}")));
        }
        let nf = self.levels as f64;
        let t = y * nf;
        let mut n = (t.ceil().max(1.0) as u64).min(self.levels);
        let near_edge = (t - t.round()).abs() <= 1e-9 * t.max(1.0);
        if self.tables.is_some() || near_edge {
            // settle ties with the same edges that bin_interval reports
            while n > 1 && x <= self.edge(n - 1)? {
                n -= 1;
            }
            while n < self.levels && x > self.edge(n)? {
                n += 1;
            }
        }
        Ok(n)
    }

    /// The half-open bin `(lo, hi]` of code `n ∈ 1..=N`.
    pub fn bin_interval(&self, n: u64) -> Result<(f64, f64)> {
        if n == 0 || n > self.levels {
            return Err(Error::Domain(format!(
                "code {n} outside 1..={}",
                self.levels
            )));
        }
        Ok((self.edge(n - 1)?, self.edge(n)?))
    }

    fn decode_bin(&self, lo: f64, hi: f64) -> Result<f64> {
        let mid = 0.5 * (lo + hi);
        match &self.decode {
            DecodeMode::Midpoint => Ok(mid),
            DecodeMode::Centroid(p) => centroid(p, lo, hi).map(|c| c.unwrap_or(mid)),
        }
    }

    pub fn decode(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        if n > self.levels {
            return Err(Error::Domain(format!(
                "code {n} outside 0..={}",
                self.levels
            )));
        }
        if let Some(t) = &self.tables {
            return Ok(t.values[n as usize]);
        }
        let (lo, hi) = self.bin_interval(n)?;
        self.decode_bin(lo, hi)
    }

    /// Encodes and decodes `x` into caller buffers; returns `Σ y_raw`.
    pub fn quantize_into(
        &self,
        x: &[f64],
        codes: &mut Vec<u64>,
        raw: &mut Vec<f64>,
    ) -> Result<f64> {
        codes.clear();
        raw.clear();
        let mut sum = 0.0;
        for &xi in x {
            let c = self.encode(xi)?;
            let y = self.decode(c)?;
            codes.push(c);
            raw.push(y);
            sum += y;
        }
        if !(sum > 0.0) {
            return Err(Error::Numerical("all entries reconstructed as zero".into()));
        }
        Ok(sum)
    }

    /// Entrywise quantization followed by normalization.
    pub fn quantize_vector(&self, x: &ProbVector) -> Result<Quantized> {
        let mut codes = Vec::with_capacity(x.len());
        let mut raw = Vec::with_capacity(x.len());
        let sum = self.quantize_into(x.as_slice(), &mut codes, &mut raw)?;
        let z = normalize_exact(&raw, sum);
        Ok(Quantized {
            codes,
            raw,
            z: ProbVector::new(z)?,
        })
    }
}

/// `y / Σy`.
pub fn normalize_exact(raw: &[f64], sum: f64) -> Vec<f64> {
    raw.iter().map(|y| y / sum).collect()
}

/// `E[X | X ∈ (lo, hi]]` under `p`, or `None` when the bin mass is below `1e-300`.
pub fn centroid(p: &Density, lo: f64, hi: f64) -> Result<Option<f64>> {
    let mass = p.integrate(|_| 1.0, lo, hi)?.value;
    if !(mass >= 1e-300) {
        return Ok(None);
    }
    let first = p.integrate(|x| x - lo, lo, hi)?.value;
    Ok(Some((lo + first / mass).clamp(lo, hi)))
}
