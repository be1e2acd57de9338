//! Single-letter densities on `[0, 1]`.

use std::fmt;
use std::sync::Arc;

use crate::constants::MaximinConstants;
use crate::error::{Error, Result};
use crate::numeric::{
    self, beta_pdf, beta_reg, beta_reg_inv, bisect, ln_beta, Integral, Tolerance,
};

type PdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied density; cdf and inverse are computed numerically.
#[derive(Clone)]
pub struct CustomDensity {
    name: String,
    pdf: PdfFn,
    lo: f64,
    hi: f64,
    norm: f64,
    mean: f64,
    singular_order: u32,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("name", &self.name)
            .field("support", &(self.lo, self.hi))
            .field("mean", &self.mean)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Density {
    /// `(a x^{1/3} + b x^{4/3})^{-3/2}`.
    Maximin(MaximinConstants),
    Beta {
        alpha: f64,
        beta: f64,
        ln_norm: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `factor · base(factor · x)` on `[0, 1/factor]`.
    Dilated {
        base: Box<Density>,
        factor: f64,
    },
    Custom(CustomDensity),
}

/// Maximin density for solved constants. The closed-form cdf is checked
/// against quadrature in debug builds.
pub fn maximin_density(c: MaximinConstants) -> Density {
    let d = Density::Maximin(c);
    if cfg!(debug_assertions) {
        for x in [1e-3, 0.1, 1.0] {
            let q = d
                .integrate(|_| 1.0, 0.0, x)
                .map(|i| i.value)
                .unwrap_or(f64::NAN);
            debug_assert!(
                (q - d.cdf(x)).abs() < 1e-8,
                "maximin cdf mismatch at {x}: {q} vs {}",
                d.cdf(x)
            );
        }
    }
    d
}

/// Marginal of a symmetric Dirichlet: `Beta(α, (K−1)α)`.
pub fn dirichlet_marginal(k: u64, alpha: f64) -> Result<Density> {
    if k < 2 {
        return Err(Error::Parameter(format!("K must be at least 2, got {k}")));
    }
    Density::beta(alpha, (k - 1) as f64 * alpha)
}

impl Density {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta density needs positive parameters, got ({alpha}, {beta})"
            )));
        }
        Ok(Density::Beta {
            alpha,
            beta,
            ln_norm: ln_beta(alpha, beta),
        })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Parameter(format!(
                "uniform support [{lo}, {hi}] not inside [0,1]"
            )));
        }
        Ok(Density::Uniform { lo, hi })
    }

    pub fn dilated(base: Density, factor: f64) -> Result<Self> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::Parameter(format!(
                "dilation factor must be >= 1, got {factor}"
            )));
        }
        Ok(Density::Dilated {
            base: Box::new(base),
            factor,
        })
    }

    /// Builds a density from an unnormalized pdf on `[lo, hi]`.
    /// `singular_order` is the substitution power used when integrating from 0.
    pub fn custom<F>(name: &str, pdf: F, lo: f64, hi: f64, singular_order: u32) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(Error::Parameter(format!(
                "support [{lo}, {hi}] not inside [0,1]"
            )));
        }
        let tol = Tolerance::new(1e-15, 1e-12);
        let norm = numeric::integrate_range(&pdf, lo, hi, singular_order, tol)?.value;
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Parameter(format!(
                "density {name} has normalizer {norm}"
            )));
        }
        let first = numeric::integrate_range(|x| x * pdf(x), lo, hi, singular_order, tol)?.value;
        Ok(Density::Custom(CustomDensity {
            name: name.to_string(),
            pdf: Arc::new(pdf),
            lo,
            hi,
            norm,
            mean: first / norm,
            singular_order,
        }))
    }

    pub fn label(&self) -> String {
        match self {
            Density::Maximin(c) => format!("maximin(K={})", c.k),
            Density::Beta { alpha, beta, .. } => format!("beta({alpha},{beta})"),
            Density::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
            Density::Dilated { base, factor } => format!("dilated({},{factor})", base.label()),
            Density::Custom(c) => c.name.clone(),
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Maximin(_) | Density::Beta { .. } => (0.0, 1.0),
            Density::Uniform { lo, hi } => (*lo, *hi),
            Density::Dilated { base, factor } => {
                let (lo, hi) = base.support();
                (lo / factor, hi / factor)
            }
            Density::Custom(c) => (c.lo, c.hi),
        }
    }

    /// Substitution power `m` for `x = u^m` when integrating from 0.
    pub fn singular_order(&self) -> u32 {
        match self {
            Density::Maximin(_) => 3,
            Density::Beta { alpha, .. } => {
                if *alpha >= 1.0 {
                    2
                } else {
                    (3.0f64).max((2.0 / alpha).ceil()).min(60.0) as u32
                }
            }
            Density::Uniform { .. } => 2,
            Density::Dilated { base, .. } => base.singular_order(),
            Density::Custom(c) => c.singular_order,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match self {
            Density::Maximin(c) => {
                if x <= 0.0 {
                    return f64::INFINITY;
                }
                // x^{-1/2} (a + b x)^{-3/2}
                let t = c.a + c.b * x;
                1.0 / (x.sqrt() * t * t.sqrt())
            }
            Density::Beta {
                alpha,
                beta,
                ln_norm,
            } => beta_pdf(*alpha, *beta, *ln_norm, x),
            Density::Uniform { lo, hi } => 1.0 / (hi - lo),
            Density::Dilated { base, factor } => factor * base.pdf(factor * x),
            Density::Custom(c) => (c.pdf)(x) / c.norm,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match self {
            Density::Maximin(c) => (2.0 * x.sqrt() / (c.a * (c.a + c.b * x).sqrt())).min(1.0),
            Density::Beta { alpha, beta, .. } => beta_reg(*alpha, *beta, x).unwrap_or(f64::NAN),
            Density::Uniform { lo, hi } => (x - lo) / (hi - lo),
            Density::Dilated { base, factor } => base.cdf(factor * x),
            Density::Custom(c) => {
                let tol = Tolerance::new(1e-15, 1e-12);
                numeric::integrate_range(&*c.pdf, c.lo, x, c.singular_order, tol)
                    .map(|i| (i.value / c.norm).clamp(0.0, 1.0))
                    .unwrap_or(f64::NAN)
            }
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("probability {u} outside [0,1]")));
        }
        let (lo, hi) = self.support();
        if u == 0.0 {
            return Ok(lo);
        }
        if u == 1.0 {
            return Ok(hi);
        }
        match self {
            Density::Maximin(c) => {
                // u² a² (a + b x) = 4 x
                let u2 = u * u;
                Ok((u2 * c.a * c.a * c.a / (4.0 - u2 * c.a * c.a * c.b)).clamp(0.0, 1.0))
            }
            Density::Beta { alpha, beta, .. } => beta_reg_inv(*alpha, *beta, u),
            Density::Uniform { lo, hi } => Ok(lo + u * (hi - lo)),
            Density::Dilated { base, factor } => Ok(base.inverse_cdf(u)? / factor),
            Density::Custom(_) => {
                let x = bisect(|x| self.cdf(x) - u, lo, hi, 200)?;
                Ok(x)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Density::Maximin(c) => c.mean(),
            Density::Beta { alpha, beta, .. } => alpha / (alpha + beta),
            Density::Uniform { lo, hi } => 0.5 * (lo + hi),
            Density::Dilated { base, factor } => base.mean() / factor,
            Density::Custom(c) => c.mean,
        }
    }

    /// `∫ g(x) p(x) dx` over `[a, b] ∩ support`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> Result<Integral> {
        self.integrate_tol(g, a, b, Tolerance::new(1e-16, 1e-12))
    }

    pub fn integrate_tol<G: Fn(f64) -> f64>(
        &self,
        g: G,
        a: f64,
        b: f64,
        tol: Tolerance,
    ) -> Result<Integral> {
        let (lo, hi) = self.support();
        let a = a.max(lo);
        let b = b.min(hi);
        if a >= b {
            return Ok(Integral {
                value: 0.0,
                error: 0.0,
            });
        }
        numeric::integrate_range(|x| g(x) * self.pdf(x), a, b, self.singular_order(), tol)
    }
}
