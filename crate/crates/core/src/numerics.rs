//! Numerical kernels: Gaussian interval and rectangle probabilities, a
//! bracketed root finder and golden-section minimization.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A real interval `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if lo < hi {
            Ok(Self { lo, hi })
        } else {
            Err(Error::domain(format!("interval requires lo < hi, got [{lo}, {hi}]")))
        }
    }

    pub fn real_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn above(lo: T) -> Self {
        Self { lo, hi: T::infinity() }
    }

    pub fn below(hi: T) -> Self {
        Self {
            lo: T::neg_infinity(),
            hi,
        }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Standard normal mass on `[za, zb]`.
///
/// The interval is evaluated through `erfc` on whichever side of the mean
/// it lies, so tail intervals keep full relative accuracy.
pub(crate) fn std_normal_mass<T: Real>(za: T, zb: T) -> T {
    if !(za < zb) {
        return T::zero();
    }
    let half = T::lit(0.5);
    let inv_sqrt2 = T::FRAC_1_SQRT_2();
    let (a, b) = (za * inv_sqrt2, zb * inv_sqrt2);
    let p = if a >= T::zero() {
        half * (a.erfc() - b.erfc())
    } else if b <= T::zero() {
        half * ((-b).erfc() - (-a).erfc())
    } else {
        half * (b.erf() - a.erf())
    };
    p.max(T::zero())
}

/// Probability that `N(mu, sigma^2)` falls in `iv`.
pub fn gauss_interval_prob<T: Real>(mu: T, sigma: T, iv: Interval<T>) -> Result<T> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive and finite, got {sigma}")));
    }
    Ok(std_normal_mass((iv.lo - mu) / sigma, (iv.hi - mu) / sigma))
}

#[inline]
fn std_normal_pdf<T: Real>(z: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(z * z) * T::lit(0.5)).exp()
}

/// Outer quadrature range, in standard deviations of the outer axis.
const OUTER_SIGMAS: f64 = 10.0;

/// Bivariate normal mass over the rectangle `rect.0 × rect.1`.
///
/// The first axis is integrated numerically (adaptive Gauss–Kronrod over
/// `mean ± 10σ`); the second is integrated in closed form through the
/// conditional Gaussian. The discarded outer tail is below `2Φ(-10) ≈ 1.5e-23`.
pub fn bvn_rect_prob<T: Real>(
    mean: [T; 2],
    cov: [[T; 2]; 2],
    rect: (Interval<T>, Interval<T>),
) -> Result<T> {
    let (c00, c01, c11) = (cov[0][0], cov[0][1], cov[1][1]);
    let sym_tol = T::lit(1e-12) * (c00.abs() + c11.abs());
    if (c01 - cov[1][0]).abs() > sym_tol {
        return Err(Error::domain("covariance is not symmetric"));
    }
    let det = c00 * c11 - c01 * c01;
    if !(c00 > T::zero() && c11 > T::zero() && det > T::zero()) {
        return Err(Error::domain(format!(
            "covariance is not positive-definite (det = {det})"
        )));
    }
    let (ra, rb) = rect;
    let (s0, s1) = (c00.sqrt(), c11.sqrt());
    if c01 == T::zero() {
        return Ok(std_normal_mass((ra.lo - mean[0]) / s0, (ra.hi - mean[0]) / s0)
            * std_normal_mass((rb.lo - mean[1]) / s1, (rb.hi - mean[1]) / s1));
    }

    // Work in the standardized outer variable u = (x - mu0) / s0.
    let span = T::lit(OUTER_SIGMAS);
    let u_lo = ((ra.lo - mean[0]) / s0).max(-span);
    let u_hi = ((ra.hi - mean[0]) / s0).min(span);
    if !(u_lo < u_hi) {
        return Ok(T::zero());
    }
    // Conditional law of the inner axis: N(mu1 + slope * s0 * u, cond_sd^2).
    let slope = c01 / c00 * s0;
    let cond_sd = (det / c00).sqrt();
    let (blo, bhi) = (rb.lo - mean[1], rb.hi - mean[1]);
    let integrand = |u: T| {
        let m = slope * u;
        std_normal_pdf(u) * std_normal_mass((blo - m) / cond_sd, (bhi - m) / cond_sd)
    };

    // The inner mass switches on/off where the conditional mean crosses an
    // inner edge; start the adaptive scheme with breaks there.
    let mut breaks = vec![u_lo, u_hi];
    for edge in [blo, bhi] {
        if edge.is_finite() {
            let u = edge / slope;
            if u > u_lo && u < u_hi {
                breaks.push(u);
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breaks"));
    let tol = T::lit(1e-14).max(T::epsilon() * T::lit(16.0));
    let mut total = T::zero();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            total = total + adaptive_gk15(&integrand, w[0], w[1], tol);
        }
    }
    Ok(total.max(T::zero()).min(T::one()))
}

const GK15_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK15_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut kronrod = fc * T::lit(GK15_WEIGHTS[7]);
    let mut gauss = fc * T::lit(G7_WEIGHTS[3]);
    for i in 0..7 {
        let dx = h * T::lit(GK15_NODES[i]);
        let pair = f(c - dx) + f(c + dx);
        kronrod = kronrod + pair * T::lit(GK15_WEIGHTS[i]);
        if i % 2 == 1 {
            gauss = gauss + pair * T::lit(G7_WEIGHTS[i / 2]);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) with a global absolute tolerance split
/// proportionally over subintervals.
pub(crate) fn adaptive_gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    const MAX_DEPTH: u32 = 48;
    let full = b - a;
    let mut total = T::zero();
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (est, err) = gk15(f, lo, hi);
        let local_tol = tol * (hi - lo) / full;
        if err <= local_tol || err <= T::epsilon() * est.abs() || depth >= MAX_DEPTH {
            total = total + est;
        } else {
            let mid = (lo + hi) * T::lit(0.5);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    total
}

/// Root of `f` inside `bracket`.
///
/// Illinois false position, falling back to bisection whenever a step
/// fails to halve the bracket. Stops when `|f(x)| <= tol` or the bracket is
/// narrower than `tol`.
pub fn find_root<T: Real, F: FnMut(T) -> T>(mut f: F, bracket: Interval<T>, tol: T) -> Result<T> {
    if !(tol > T::zero()) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracket {
            lo: a.to_f64().unwrap_or(f64::NAN),
            hi: b.to_f64().unwrap_or(f64::NAN),
            f_lo: fa.to_f64().unwrap_or(f64::NAN),
            f_hi: fb.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = T::lit(0.5);
    // Which endpoint was retained on the previous step (-1 = a, 1 = b).
    let mut side = 0i8;
    for _ in 0..500 {
        let width = b - a;
        let mut x = b - fb * width / (fb - fa);
        if !(x > a && x < b) {
            x = a + width * half;
        }
        let fx = f(x);
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        }
        if b - a > width * half {
            // Slow progress: force a bisection step.
            let m = a + (b - a) * half;
            let fm = f(m);
            if fm.abs() <= tol {
                return Ok(m);
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
            side = 0;
        }
        if b - a <= tol {
            break;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Golden-section minimization of `f` over `bracket`.
///
/// Returns the best point sampled (the endpoints included), so the reported
/// value never exceeds `f` at either end of the bracket.
pub fn minimize_scalar<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    bracket: Interval<T>,
    tol: T,
) -> Result<(T, T)> {
    if !(bracket.lo.is_finite() && bracket.hi.is_finite()) {
        return Err(Error::domain("minimization bracket must be finite"));
    }
    if !(tol > T::zero()) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let inv_phi = T::lit(0.618_033_988_749_894_9);
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let mut best = (a, f(a));
    let fb_end = f(b);
    if fb_end < best.1 {
        best = (b, fb_end);
    }
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        for (x, fx) in [(c, fc), (d, fd)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}
