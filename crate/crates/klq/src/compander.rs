//! Monotone maps `f: [0,1] → [0,1]` applied before uniform quantization.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::constants::MaximinConstants;
use crate::error::{Error, Result};
use crate::numeric::{
    asinh_sqrt, beta_pdf, beta_reg, beta_reg_inv, bisect, ln_beta, newton_bisect,
};

/// Family tag plus parameters; the serializable description of a compander.
#[derive(Debug, Clone, PartialEq)]
pub enum CompanderSpec {
    Identity,
    Power {
        s: f64,
    },
    Minimax {
        constants: MaximinConstants,
    },
    ApproxMinimax {
        k: u64,
    },
    Beta {
        k: u64,
        alpha: f64,
    },
    L2Sq {
        k: u64,
    },
    L1 {
        k: u64,
        gamma: f64,
    },
    Custom {
        xs: Vec<f64>,
        ys: Vec<f64>,
    },
    Blend {
        delta: f64,
        base: Box<CompanderSpec>,
    },
}

type DerivFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
struct Table {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    exact_derivative: Option<DerivFn>,
}

#[derive(Clone)]
enum Kind {
    Identity,
    Power { s: f64 },
    ArcSinh { gamma: f64, norm: f64 },
    Beta { p: f64, q: f64, ln_norm: f64 },
    L2Sq { k: f64 },
    L1 { gamma: f64, norm: f64 },
    Table(Arc<Table>),
    Blend { delta: f64, base: Box<Compander> },
}

/// An immutable compander with forward map, inverse and derivative.
#[derive(Clone)]
pub struct Compander {
    spec: CompanderSpec,
    kind: Kind,
}

impl fmt::Debug for Compander {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Compander({})", self.spec)
    }
}

/// Builds the compander described by `spec`.
pub fn build_compander(spec: &CompanderSpec) -> Result<Compander> {
    match spec {
        CompanderSpec::Identity => Ok(Compander::identity()),
        CompanderSpec::Power { s } => Compander::power(*s),
        CompanderSpec::Minimax { constants } => Ok(Compander::minimax(*constants)),
        CompanderSpec::ApproxMinimax { k } => Compander::approx_minimax(*k),
        CompanderSpec::Beta { k, alpha } => Compander::beta(*k, *alpha),
        CompanderSpec::L2Sq { k } => Compander::l2sq(*k),
        CompanderSpec::L1 { k, gamma } => Compander::l1_with_gamma(*k, *gamma),
        CompanderSpec::Custom { xs, ys } => Compander::tabulated(xs.clone(), ys.clone(), None),
        CompanderSpec::Blend { delta, base } => build_compander(base)?.blend(*delta),
    }
}

fn check_k(k: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::Parameter(format!("K must be at least 2, got {k}")));
    }
    Ok(k as f64)
}

/// `γ` for which `ln(γx+1)/ln(γ+1)` is the optimal compander of the density
/// `(αx+β)^{-2}` with mean `1/K`.
pub fn l1_gamma(k: u64) -> Result<f64> {
    let kf = check_k(k)?;
    if k < 3 {
        return Err(Error::Parameter("the L1 compander needs K >= 3".into()));
    }
    let mean = |lg: f64| {
        let g = lg.exp();
        (1.0 + g) / (g * g) * (g.ln_1p() - g / (1.0 + g))
    };
    let lg = bisect(|lg| mean(lg) - 1.0 / kf, -20.0, 700.0, 300)?;
    Ok(lg.exp())
}

impl Compander {
    pub fn identity() -> Self {
        Compander {
            spec: CompanderSpec::Identity,
            kind: Kind::Identity,
        }
    }

    pub fn power(s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Parameter(format!(
                "power exponent must be in (0,1], got {s}"
            )));
        }
        Ok(Compander {
            spec: CompanderSpec::Power { s },
            kind: Kind::Power { s },
        })
    }

    fn arcsinh(gamma: f64) -> Kind {
        Kind::ArcSinh {
            gamma,
            norm: asinh_sqrt(gamma),
        }
    }

    /// `asinh(√(c_K K ln K x)) / asinh(√(c_K K ln K))`.
    pub fn minimax(constants: MaximinConstants) -> Self {
        Compander {
            spec: CompanderSpec::Minimax { constants },
            kind: Self::arcsinh(constants.r),
        }
    }

    /// Minimax compander with freshly solved constants.
    pub fn minimax_for(k: u64) -> Result<Self> {
        Ok(Self::minimax(MaximinConstants::solve(k)?))
    }

    /// The minimax form with `c_K` replaced by `1/2`.
    pub fn approx_minimax(k: u64) -> Result<Self> {
        let kf = check_k(k)?;
        Ok(Compander {
            spec: CompanderSpec::ApproxMinimax { k },
            kind: Self::arcsinh(0.5 * kf * kf.ln()),
        })
    }

    /// `I_x((α+1)/3, ((K−1)α+2)/3)`, optimal for the symmetric Dirichlet(α) prior.
    pub fn beta(k: u64, alpha: f64) -> Result<Self> {
        let kf = check_k(k)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!(
                "beta compander needs alpha > 0, got {alpha}"
            )));
        }
        let p = (alpha + 1.0) / 3.0;
        let q = ((kf - 1.0) * alpha + 2.0) / 3.0;
        Ok(Compander {
            spec: CompanderSpec::Beta { k, alpha },
            kind: Kind::Beta {
                p,
                q,
                ln_norm: ln_beta(p, q),
            },
        })
    }

    /// `(√(1+K(K−2)x) − 1)/(K−2)`.
    pub fn l2sq(k: u64) -> Result<Self> {
        let kf = check_k(k)?;
        Ok(Compander {
            spec: CompanderSpec::L2Sq { k },
            kind: Kind::L2Sq { k: kf },
        })
    }

    /// `ln(γ_K x + 1)/ln(γ_K + 1)` with the solved `γ_K`.
    pub fn l1(k: u64) -> Result<Self> {
        Self::l1_with_gamma(k, l1_gamma(k)?)
    }

    pub fn l1_with_gamma(k: u64, gamma: f64) -> Result<Self> {
        check_k(k)?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!(
                "L1 compander needs gamma > 0, got {gamma}"
            )));
        }
        Ok(Compander {
            spec: CompanderSpec::L1 { k, gamma },
            kind: Kind::L1 {
                gamma,
                norm: gamma.ln_1p(),
            },
        })
    }

    /// Monotone cubic (Fritsch–Carlson) interpolation through `(xs, ys)`.
    /// `derivative`, when given, replaces the numeric derivative.
    pub fn tabulated(xs: Vec<f64>, ys: Vec<f64>, derivative: Option<DerivFn>) -> Result<Self> {
        Self::table_with(xs, ys, None, derivative)
    }

    /// Like [`Compander::tabulated`] but interpolates with the given node slopes,
    /// limited to `[0, 3·secant]` so every segment stays monotone.
    pub fn tabulated_hermite(
        xs: Vec<f64>,
        ys: Vec<f64>,
        slopes: Vec<f64>,
        derivative: Option<DerivFn>,
    ) -> Result<Self> {
        if slopes.len() != xs.len() {
            return Err(Error::Parameter("need one slope per table node".into()));
        }
        Self::table_with(xs, ys, Some(slopes), derivative)
    }

    fn table_with(
        xs: Vec<f64>,
        ys: Vec<f64>,
        slopes: Option<Vec<f64>>,
        derivative: Option<DerivFn>,
    ) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Parameter(
                "table needs at least two (x, y) pairs of equal length".into(),
            ));
        }
        if xs[0] != 0.0 || ys[0] != 0.0 || *xs.last().unwrap() != 1.0 || *ys.last().unwrap() != 1.0
        {
            return Err(Error::Parameter(
                "table must start at (0,0) and end at (1,1)".into(),
            ));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parameter(
                    "table x values must be strictly increasing".into(),
                ));
            }
        }
        for w in ys.windows(2) {
            if !(w[1] >= w[0]) || !w[1].is_finite() {
                return Err(Error::Parameter(
                    "table y values must be nondecreasing".into(),
                ));
            }
        }
        let slopes = match slopes {
            Some(d) => limit_slopes(&xs, &ys, d),
            None => pchip_slopes(&xs, &ys),
        };
        let spec = CompanderSpec::Custom {
            xs: xs.clone(),
            ys: ys.clone(),
        };
        Ok(Compander {
            spec,
            kind: Kind::Table(Arc::new(Table {
                xs,
                ys,
                slopes,
                exact_derivative: derivative,
            })),
        })
    }

    /// `(1−δ) f + δ x^{1/2}`.
    pub fn blend(self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!(
                "blend weight must be in (0,1), got {delta}"
            )));
        }
        let spec = CompanderSpec::Blend {
            delta,
            base: Box::new(self.spec.clone()),
        };
        Ok(Compander {
            spec,
            kind: Kind::Blend {
                delta,
                base: Box::new(self),
            },
        })
    }

    pub fn spec(&self) -> &CompanderSpec {
        &self.spec
    }

    /// Short family name: `identity`, `power`, `minimax`, ...
    pub fn family(&self) -> &'static str {
        self.spec.family()
    }

    /// Whether distinct inputs always have distinct images.
    pub fn is_strictly_monotone(&self) -> bool {
        match &self.kind {
            Kind::Table(t) => t.ys.windows(2).all(|w| w[1] > w[0]),
            _ => true,
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Identity => x,
            Kind::Power { s } => x.powf(*s),
            Kind::ArcSinh { gamma, norm } => asinh_sqrt(gamma * x) / norm,
            Kind::Beta { p, q, .. } => beta_reg(*p, *q, x).unwrap_or(f64::NAN),
            Kind::L2Sq { k } => k * x / ((1.0 + k * (k - 2.0) * x).sqrt() + 1.0),
            Kind::L1 { gamma, norm } => (gamma * x).ln_1p() / norm,
            Kind::Table(t) => t.eval(x),
            Kind::Blend { delta, base } => (1.0 - delta) * base.forward(x) + delta * x.sqrt(),
        }
    }

    /// Largest `x` with `f(x) ≤ y`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain(format!(
                "compander inverse argument {y} outside [0,1]"
            )));
        }
        if y == 1.0 {
            return Ok(1.0);
        }
        if y == 0.0 && self.is_strictly_monotone() {
            return Ok(0.0);
        }
        let x = match &self.kind {
            Kind::Identity => y,
            Kind::Power { s } => y.powf(1.0 / s),
            Kind::ArcSinh { gamma, norm } => {
                let s = (y * norm).sinh();
                s * s / gamma
            }
            Kind::Beta { p, q, .. } => beta_reg_inv(*p, *q, y)
                .map_err(|e| Error::Numerical(format!("beta compander inverse at {y}: {e}")))?,
            Kind::L2Sq { k } => y * (2.0 + (k - 2.0) * y) / k,
            Kind::L1 { gamma, norm } => (y * norm).exp_m1() / gamma,
            Kind::Table(t) => t.invert(y)?,
            Kind::Blend { .. } => newton_bisect(
                |x| Ok(self.forward(x) - y),
                |x| self.derivative(x),
                0.0,
                1.0,
                y * y,
                1e-15,
            )?,
        };
        Ok(x.clamp(0.0, 1.0))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Identity => 1.0,
            Kind::Power { s } => s * x.powf(s - 1.0),
            Kind::ArcSinh { gamma, norm } => {
                gamma.sqrt() / (2.0 * norm * x.sqrt() * (gamma * x + 1.0).sqrt())
            }
            Kind::Beta { p, q, ln_norm } => beta_pdf(*p, *q, *ln_norm, x),
            Kind::L2Sq { k } => k / (2.0 * (1.0 + k * (k - 2.0) * x).sqrt()),
            Kind::L1 { gamma, norm } => gamma / ((1.0 + gamma * x) * norm),
            Kind::Table(t) => match &t.exact_derivative {
                Some(d) => d(x),
                None => self.numeric_derivative(x),
            },
            Kind::Blend { delta, base } => {
                (1.0 - delta) * base.derivative(x) + delta * 0.5 / x.sqrt()
            }
        }
    }

    /// Central difference with step `1e-6·max(x, 1e-6)`, one-sided at the ends.
    pub fn numeric_derivative(&self, x: f64) -> f64 {
        let h = 1e-6 * x.max(1e-6);
        let lo = (x - h).max(0.0);
        let hi = (x + h).min(1.0);
        (self.forward(hi) - self.forward(lo)) / (hi - lo)
    }

    /// `f′(x)^{-2} x^{-1}`, the local asymptotic loss weight, in a form that stays finite
    /// near 0 for the closed-form families.
    pub fn loss_weight(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Power { s } => x.powf(1.0 - 2.0 * s) / (s * s),
            Kind::ArcSinh { gamma, norm } => 4.0 * norm * norm * (x + 1.0 / gamma),
            _ => {
                let d = self.derivative(x);
                1.0 / (d * d * x)
            }
        }
    }

    /// `(c, α)` such that `f(x) − c x^α` is nondecreasing on `[0,1]`, when the
    /// family admits one with `α = 1/2`.
    pub fn dominance_certificate(&self) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Power { s } if *s <= 0.5 => Some((2.0 * s, 0.5)),
            Kind::ArcSinh { gamma, norm } => {
                Some((gamma.sqrt() / (norm * (gamma + 1.0).sqrt()), 0.5))
            }
            Kind::Blend { delta, base } => {
                let inner = base.dominance_certificate().map(|(c, _)| c).unwrap_or(0.0);
                Some((delta + (1.0 - delta) * inner, 0.5))
            }
            _ => None,
        }
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for i in 1..n - 1 {
        if del[i - 1] == 0.0 || del[i] == 0.0 || del[i - 1].signum() != del[i].signum() {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    d[0] = pchip_end(h[0], h[1], del[0], del[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn limit_slopes(xs: &[f64], ys: &[f64], mut d: Vec<f64>) -> Vec<f64> {
    let n = xs.len();
    let del: Vec<f64> = (0..n - 1)
        .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
        .collect();
    for i in 0..n {
        let mut cap = f64::INFINITY;
        if i > 0 {
            cap = cap.min(3.0 * del[i - 1]);
        }
        if i + 1 < n {
            cap = cap.min(3.0 * del[i]);
        }
        d[i] = if d[i] >= 0.0 { d[i].min(cap) } else { 0.0 };
    }
    d
}

fn pchip_end(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() || del0 == 0.0 {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

impl Table {
    fn segment_eval(&self, i: usize, x: f64) -> f64 {
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self
            .xs
            .partition_point(|&v| v <= x)
            .clamp(1, self.xs.len() - 1)
            - 1;
        self.segment_eval(i, x).clamp(self.ys[i], self.ys[i + 1])
    }

    fn invert(&self, y: f64) -> Result<f64> {
        let j = self.ys.partition_point(|&v| v <= y);
        if j >= self.ys.len() {
            return Ok(1.0);
        }
        let i = j - 1;
        let (lo, hi) = (self.xs[i], self.xs[i + 1]);
        let x = bisect(
            |x| self.segment_eval(i, x).clamp(self.ys[i], self.ys[i + 1]) - y,
            lo,
            hi,
            200,
        )
        .unwrap_or(lo);
        Ok(x)
    }
}

impl CompanderSpec {
    pub fn family(&self) -> &'static str {
        match self {
            CompanderSpec::Identity => "identity",
            CompanderSpec::Power { .. } => "power",
            CompanderSpec::Minimax { .. } => "minimax",
            CompanderSpec::ApproxMinimax { .. } => "approx_minimax",
            CompanderSpec::Beta { .. } => "beta",
            CompanderSpec::L2Sq { .. } => "l2sq",
            CompanderSpec::L1 { .. } => "l1",
            CompanderSpec::Custom { .. } => "custom",
            CompanderSpec::Blend { .. } => "blend",
        }
    }
}

impl fmt::Display for CompanderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompanderSpec::Identity => write!(f, "identity"),
            CompanderSpec::Power { s } => write!(f, "power s={s:?}"),
            CompanderSpec::Minimax { constants } => {
                write!(f, "minimax K={} c_K={:?}", constants.k, constants.c)
            }
            CompanderSpec::ApproxMinimax { k } => write!(f, "approx_minimax K={k}"),
            CompanderSpec::Beta { k, alpha } => write!(f, "beta K={k} alpha={alpha:?}"),
            CompanderSpec::L2Sq { k } => write!(f, "l2sq K={k}"),
            CompanderSpec::L1 { k, gamma } => write!(f, "l1 K={k} gamma={gamma:?}"),
            CompanderSpec::Custom { xs, ys } => {
                write!(f, "custom ")?;
                for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x:?}:{y:?}")?;
                }
                Ok(())
            }
            CompanderSpec::Blend { delta, base } => write!(f, "blend delta={delta:?} {base}"),
        }
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::parse(1, msg)
}

fn take_kv<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    let tok = tok.ok_or_else(|| parse_err(format!("missing {key}=")))?;
    match tok.split_once('=') {
        Some((k, v)) if k == key => Ok(v),
        _ => Err(parse_err(format!("expected {key}=..., found {tok}"))),
    }
}

fn num(v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| parse_err(format!("bad number {v}")))?;
    if !x.is_finite() {
        return Err(parse_err(format!("non-finite number {v}")));
    }
    Ok(x)
}

fn int(v: &str) -> Result<u64> {
    v.parse().map_err(|_| parse_err(format!("bad integer {v}")))
}

fn parse_spec(text: &str, depth: usize) -> Result<CompanderSpec> {
    if depth > 8 {
        return Err(parse_err("blend nesting too deep"));
    }
    let text = text.trim();
    let (family, rest) = match text.split_once(char::is_whitespace) {
        Some((f, r)) => (f, r.trim_start()),
        None => (text, ""),
    };
    if family == "blend" {
        let (first, base) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        let delta = num(take_kv(Some(first), "delta")?)?;
        return Ok(CompanderSpec::Blend {
            delta,
            base: Box::new(parse_spec(base, depth + 1)?),
        });
    }
    if family == "custom" {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (x, y) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| parse_err(format!("bad table point {pair}")))?;
            xs.push(num(x)?);
            ys.push(num(y)?);
        }
        return Ok(CompanderSpec::Custom { xs, ys });
    }
    let mut toks = rest.split_whitespace();
    let spec = match family {
        "identity" => CompanderSpec::Identity,
        "power" => CompanderSpec::Power {
            s: num(take_kv(toks.next(), "s")?)?,
        },
        "minimax" => {
            let k = int(take_kv(toks.next(), "K")?)?;
            let constants = match toks.next() {
                Some(tok) => {
                    let c = num(take_kv(Some(tok), "c_K")?)?;
                    if k < 5 || !(0.2..=0.8).contains(&c) {
                        return Err(parse_err(format!(
                            "minimax constants out of range: K={k} c_K={c}"
                        )));
                    }
                    MaximinConstants::from_c(k, c)
                }
                None => MaximinConstants::solve(k).map_err(|e| parse_err(e.to_string()))?,
            };
            CompanderSpec::Minimax { constants }
        }
        "approx_minimax" => CompanderSpec::ApproxMinimax {
            k: int(take_kv(toks.next(), "K")?)?,
        },
        "beta" => {
            let k = int(take_kv(toks.next(), "K")?)?;
            let alpha = num(take_kv(toks.next(), "alpha")?)?;
            CompanderSpec::Beta { k, alpha }
        }
        "l2sq" => CompanderSpec::L2Sq {
            k: int(take_kv(toks.next(), "K")?)?,
        },
        "l1" => {
            let k = int(take_kv(toks.next(), "K")?)?;
            let gamma = match toks.next() {
                Some(tok) => num(take_kv(Some(tok), "gamma")?)?,
                None => l1_gamma(k).map_err(|e| parse_err(e.to_string()))?,
            };
            CompanderSpec::L1 { k, gamma }
        }
        other => return Err(parse_err(format!("unknown compander family {other:?}"))),
    };
    if let Some(extra) = toks.next() {
        return Err(parse_err(format!("unexpected field {extra}")));
    }
    Ok(spec)
}

impl FromStr for CompanderSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_spec(s, 0)
    }
}
