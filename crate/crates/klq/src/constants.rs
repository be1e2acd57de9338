//! Constants of the maximin single-letter density.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{asinh_sqrt, bisect};

/// `(K, c_K, a_K, b_K)` with `r = b_K / a_K = c_K K ln K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximinConstants {
    pub k: u64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
}

/// Mean of the maximin-shaped density as a function of `r = b/a`.
pub fn maximin_mean(r: f64) -> f64 {
    -1.0 / r + (1.0 / r + 1.0).sqrt() * asinh_sqrt(r) / r
}

impl MaximinConstants {
    /// Solves for `c_K` by bisection on `[0.2, 0.8]` so that the density has mean `1/K`.
    ///
    /// `K < 25` is accepted; there the bracket is only known to hold numerically.
    pub fn solve(k: u64) -> Result<Self> {
        if k < 5 {
            return Err(Error::Parameter(format!(
                "maximin constants need K >= 5, got {k}"
            )));
        }
        let kf = k as f64;
        let klog = kf * kf.ln();
        let target = 1.0 / kf;
        let c = bisect(|c| maximin_mean(c * klog) - target, 0.2, 0.8, 200)?;
        Ok(Self::from_c(k, c))
    }

    /// Derived coefficients for a given `c`.
    pub fn from_c(k: u64, c: f64) -> Self {
        let kf = k as f64;
        let r = c * kf * kf.ln();
        let a = (4.0 / (r + 1.0)).cbrt();
        let b = 4.0 / (a * a) - a;
        MaximinConstants { k, c, a, b, r }
    }

    /// `φ(1) = 2 asinh(√(b/a)) / √b`, the normalizer of `(p*/x)^{1/3}`.
    pub fn phi_one(&self) -> f64 {
        2.0 * asinh_sqrt(self.r) / self.b.sqrt()
    }

    /// Mean of the density implied by these coefficients.
    pub fn mean(&self) -> f64 {
        maximin_mean(self.r)
    }
}

impl fmt::Display for MaximinConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K={} c_K={:?} a_K={:?} b_K={:?}",
            self.k, self.c, self.a, self.b
        )
    }
}

impl FromStr for MaximinConstants {
    type Err = Error;

    /// Parses one record `K=<int> c_K=<f64> a_K=<f64> b_K=<f64>`; the coefficients
    /// must agree with `c_K` to 1e-12 relative.
    fn from_str(s: &str) -> Result<Self> {
        let mut k = None;
        let mut c = None;
        let mut a = None;
        let mut b = None;
        for field in s.split_whitespace() {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("field without '=': {field}")))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(1, format!("bad number {v}")))
            };
            match key {
                "K" => {
                    k = Some(
                        val.parse::<u64>()
                            .map_err(|_| Error::parse(1, format!("bad K {val}")))?,
                    )
                }
                "c_K" => c = Some(num(val)?),
                "a_K" => a = Some(num(val)?),
                "b_K" => b = Some(num(val)?),
                other => return Err(Error::parse(1, format!("unknown key {other}"))),
            }
        }
        let (k, c, a, b) = match (k, c, a, b) {
            (Some(k), Some(c), Some(a), Some(b)) => (k, c, a, b),
            _ => return Err(Error::parse(1, "record needs K, c_K, a_K and b_K")),
        };
        if k < 5 || !(0.2..=0.8).contains(&c) {
            return Err(Error::parse(
                1,
                format!("constants out of range: K={k} c_K={c}"),
            ));
        }
        let derived = Self::from_c(k, c);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        if !close(a, derived.a) || !close(b, derived.b) {
            return Err(Error::parse(1, "a_K/b_K inconsistent with c_K"));
        }
        Ok(derived)
    }
}

/// Reads a multi-line constants cache, one record per line; blank and `#` lines are skipped.
pub fn parse_constants_cache(text: &str) -> Result<Vec<MaximinConstants>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec = line.parse::<MaximinConstants>().map_err(|e| match e {
            Error::Parse { msg, .. } => Error::parse(i + 1, msg),
            other => other,
        })?;
        out.push(rec);
    }
    Ok(out)
}
