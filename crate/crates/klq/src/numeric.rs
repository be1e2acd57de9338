//! Special functions, adaptive quadrature and scalar root finding.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s).ln() - ln_gamma(1.0 - x);
    }
    if x > 20.0 {
        return stirling_ln_gamma(x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn stirling_corr(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
}

fn stirling_ln_gamma(z: f64) -> f64 {
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + stirling_corr(z)
}

/// `ln B(a, b)`, with the large-argument difference taken in a cancellation-free form.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, big) = if a <= b { (a, b) } else { (b, a) };
    if big > 20.0 {
        // lnΓ(big) - lnΓ(big + small) without subtracting two huge numbers
        let s = big + small;
        let diff =
            -(big - 0.5) * (small / big).ln_1p() - small * s.ln() + small + stirling_corr(big)
                - stirling_corr(s);
        return ln_gamma(small) + diff;
    }
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let max_iter = 20_000 + (10.0 * (a.max(b)).sqrt()) as usize;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Parameter(format!(
            "beta parameters must be positive, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "incomplete beta argument {x} outside [0,1]"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x)? / b).clamp(0.0, 1.0))
    }
}

/// Beta density with parameters `(a, b)`; `ln_norm` is `ln B(a, b)`.
pub fn beta_pdf(a: f64, b: f64, ln_norm: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return if a < 1.0 {
            f64::INFINITY
        } else if a == 1.0 {
            (-ln_norm).exp()
        } else {
            0.0
        };
    }
    if x >= 1.0 {
        return if b < 1.0 {
            f64::INFINITY
        } else if b == 1.0 {
            (-ln_norm).exp()
        } else {
            0.0
        };
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_norm).exp()
}

/// Inverse of `I_x(a, b)` in `x`.
pub fn beta_reg_inv(a: f64, b: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!(
            "incomplete beta inverse argument {y} outside [0,1]"
        )));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(1.0);
    }
    let ln_norm = ln_beta(a, b);
    // small-x asymptote I_x ~ x^a / (a B)
    let guess = ((y.ln() + a.ln() + ln_norm) / a).exp();
    let x0 = if guess > 0.0 && guess < 1.0 {
        guess
    } else {
        0.5
    };
    newton_bisect(
        |x| beta_reg(a, b, x).map(|v| v - y),
        |x| beta_pdf(a, b, ln_norm, x),
        0.0,
        1.0,
        x0,
        1e-15,
    )
}

/// `asinh(√w)` through `ln(√w + √(w+1))`, accurate for small `w`.
pub fn asinh_sqrt(w: f64) -> f64 {
    let s = w.sqrt();
    if s < 0.5 {
        // ln(1 + s + (√(w+1) - 1)) with the second term formed without cancellation
        (s + w / ((w + 1.0).sqrt() + 1.0)).ln_1p()
    } else {
        (s + (w + 1.0).sqrt()).ln()
    }
}

/// Safeguarded Newton iteration on a bracket `[lo, hi]` where `f(lo) ≤ 0 ≤ f(hi)`.
pub fn newton_bisect<F, D>(f: F, df: D, lo: f64, hi: f64, x0: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
    D: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut x = x0.clamp(lo, hi);
    for _ in 0..400 {
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = if d.is_finite() && d > 0.0 {
            x - fx / d
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= rel_tol * x.abs().max(f64::MIN_POSITIVE)
            || hi - lo <= rel_tol * hi.abs()
        {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "root finder did not converge in [{lo}, {hi}]"
    )))
}

/// Bisection for a monotone function with a sign change on `[lo, hi]`.
/// Runs until the bracket stops shrinking or `max_iter` halvings.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, max_iter: usize) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracket(format!("f({lo})={flo}, f({hi})={fhi}")));
    }
    let lo_negative = flo < 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stopping rule for [`integrate`]; relative targets below `100 ε` are raised to it.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    let mut resabs = WGK[7] * fc.abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        resabs += WGK[j] * (fv1[j].abs() + fv2[j].abs());
    }
    let value = resk * half;
    resasc *= half.abs();
    resabs *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (7, 15) quadrature over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
        });
    }
    if a > b {
        let r = integrate(f, b, a, tol)?;
        return Ok(Integral {
            value: -r.value,
            error: r.error,
        });
    }
    let (v, e) = kronrod15(&f, a, b);
    if !v.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let mut heap = BinaryHeap::new();
    let mut total = v;
    let mut total_err = e;
    let mut settled_err = 0.0;
    heap.push(Piece {
        a,
        b,
        value: v,
        error: e,
    });
    let mut count = 1;
    // each panel's error estimate is floored at 50 eps of its magnitude
    let rel = tol.rel.max(100.0 * f64::EPSILON);
    while total_err > tol.abs.max(rel * total.abs()) {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b || p.b - p.a < 1e-300 {
            // cannot split further; keep its error as final
            settled_err += p.error;
            continue;
        }
        if count >= tol.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature on [{a}, {b}] did not reach tolerance (value {total}, error {total_err})"
            )));
        }
        let (v1, e1) = kronrod15(&f, p.a, mid);
        let (v2, e2) = kronrod15(&f, mid, p.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{}, {}]",
                p.a, p.b
            )));
        }
        total += v1 + v2 - p.value;
        heap.push(Piece {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
        count += 1;
        total_err = settled_err + heap.iter().map(|q| q.error).sum::<f64>();
    }
    // re-sum to shed accumulated rounding from incremental updates
    let value = heap.iter().map(|q| q.value).sum::<f64>();
    let value = if heap.is_empty() { total } else { value };
    Ok(Integral {
        value,
        error: total_err,
    })
}

/// Integral over `[0, b]` of a function with an integrable power singularity at 0,
/// through `x = u^m`. With `m = 3` singularities up to `x^{-2/3}` become bounded.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    m: u32,
    tol: Tolerance,
) -> Result<Integral> {
    let m = m.max(1);
    if m == 1 {
        return integrate(f, 0.0, b, tol);
    }
    let mf = m as f64;
    let ub = b.powf(1.0 / mf);
    integrate(
        |u| {
            let um1 = u.powi(m as i32 - 1);
            let x = um1 * u;
            if x <= 0.0 {
                0.0
            } else {
                f(x) * mf * um1
            }
        },
        0.0,
        ub,
        tol,
    )
}

/// Integral over `[a, b]`, switching to the `x = u^m` transform when `a == 0`.
pub fn integrate_range<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    m: u32,
    tol: Tolerance,
) -> Result<Integral> {
    if a == 0.0 {
        integrate_from_zero(f, b, m, tol)
    } else {
        integrate(f, a, b, tol)
    }
}
