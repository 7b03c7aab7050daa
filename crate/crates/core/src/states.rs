//! Two-mode Gaussian states and Gaussian mixtures, described by their
//! Wigner-function means and covariance matrices.
//!
//! Quadratures are ordered `(x_a, p_a, x_b, p_b)` with `[x, p] = i`, so the
//! vacuum has covariance `diag(1/2, 1/2, 1/2, 1/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{find_root, gauss_interval_prob, Interval};
use crate::scalar::Real;

/// Measurement basis shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    P,
}

impl Basis {
    /// Indices of the party-a and party-b quadratures in the 4-vector.
    fn indices(self) -> [usize; 2] {
        match self {
            Basis::X => [0, 2],
            Basis::P => [1, 3],
        }
    }
}

/// Tolerance on the physicality bound `nu >= 1/2`.
const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent<T> {
    pub weight: T,
    pub mean: [T; 4],
    pub cov: [[T; 4]; 4],
}

impl<T: Real> GaussianComponent<T> {
    pub fn new(weight: T, mean: [T; 4], cov: [[T; 4]; 4]) -> Result<Self> {
        let c = Self { weight, mean, cov };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= T::zero() && self.weight <= T::one()) {
            return Err(Error::domain(format!("component weight {} outside [0, 1]", self.weight)));
        }
        let scale = (0..4).map(|i| self.cov[i][i].abs()).fold(T::zero(), T::max);
        for i in 0..4 {
            for j in 0..i {
                if (self.cov[i][j] - self.cov[j][i]).abs() > T::lit(1e-12) * scale {
                    return Err(Error::domain("covariance is not symmetric"));
                }
            }
        }
        if !is_positive_definite(&self.cov) {
            return Err(Error::domain("covariance is not positive-definite"));
        }
        // nu_- >= 1/2 and nu_+ >= 1/2 without square roots:
        // det >= 1/16 and seralian <= 1/4 + 4 det.
        let (seralian, det) = self.invariants();
        let slack = T::lit(PHYSICALITY_TOL).max(T::epsilon() * T::lit(64.0) * scale * scale);
        let det_slack = T::lit(PHYSICALITY_TOL).max(T::epsilon() * T::lit(64.0) * scale.powi(4));
        if det < T::lit(1.0 / 16.0) - det_slack || seralian > T::lit(0.25) + T::lit(4.0) * det + slack {
            return Err(Error::domain(format!(
                "covariance violates the uncertainty principle (symplectic eigenvalues {:?}, need >= 1/2)",
                self.symplectic_eigenvalues()
            )));
        }
        Ok(())
    }

    /// Symplectic eigenvalues `(nu_-, nu_+)`, from the two-mode invariants
    /// `det(cov)` and `det A + det B + 2 det C` of the block form `[[A, C], [Cᵀ, B]]`.
    pub fn symplectic_eigenvalues(&self) -> [T; 2] {
        let (seralian, det) = self.invariants();
        let disc = (seralian * seralian - T::lit(4.0) * det).max(T::zero()).sqrt();
        let half = T::lit(0.5);
        let upper = (seralian + disc) * half;
        let lower = if upper > T::zero() { det / upper } else { T::zero() };
        let (lower, upper) = (lower.max(T::zero()).sqrt(), upper.max(T::zero()).sqrt());
        [lower.min(upper), lower.max(upper)]
    }

    fn invariants(&self) -> (T, T) {
        let m = &self.cov;
        let det2 = |a: T, b: T, c: T, d: T| a * d - b * c;
        let det_a = det2(m[0][0], m[0][1], m[1][0], m[1][1]);
        let det_b = det2(m[2][2], m[2][3], m[3][2], m[3][3]);
        let det_c = det2(m[0][2], m[0][3], m[1][2], m[1][3]);
        let seralian = det_a + det_b + det_c + det_c;
        (seralian, det4(m))
    }
}

fn is_positive_definite<T: Real>(m: &[[T; 4]; 4]) -> bool {
    let mut l = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

fn det4<T: Real>(m: &[[T; 4]; 4]) -> T {
    let mut a = *m;
    let mut det = T::one();
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("nonempty");
        if a[pivot][col] == T::zero() {
            return T::zero();
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det = det * a[col][col];
        for row in col + 1..4 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] = a[row][k] - factor * a[col][k];
            }
        }
    }
    det
}

/// One component of a basis marginal: a weighted bivariate Gaussian over
/// the two parties' outcomes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalComponent<T> {
    pub weight: T,
    pub mean: [T; 2],
    pub cov: [[T; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureState<T> {
    components: Vec<GaussianComponent<T>>,
}

impl<T: Real> GaussianMixtureState<T> {
    pub fn new(components: Vec<GaussianComponent<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::domain("a state needs at least one component"));
        }
        for c in &components {
            c.validate()?;
        }
        let total: T = components.iter().map(|c| c.weight).sum();
        if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
            return Err(Error::domain(format!("component weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GaussianComponent<T>] {
        &self.components
    }

    /// Party-a/party-b sub-blocks for `basis`, one per component.
    pub fn marginal(&self, basis: Basis) -> Vec<MarginalComponent<T>> {
        let [i, j] = basis.indices();
        self.components
            .iter()
            .map(|c| MarginalComponent {
                weight: c.weight,
                mean: [c.mean[i], c.mean[j]],
                cov: [[c.cov[i][i], c.cov[i][j]], [c.cov[j][i], c.cov[j][j]]],
            })
            .collect()
    }
}

fn check_width<T: Real>(name: &str, w: T) -> Result<()> {
    if w > T::zero() && w.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {w}")))
    }
}

/// Product of two minimum-uncertainty mode states with position widths
/// `sigma_x_a`, `sigma_x_b`; each mode has `sigma_p = 1 / (2 sigma_x)`.
fn product_component<T: Real>(weight: T, sigma_x_a: T, sigma_x_b: T) -> Result<GaussianComponent<T>> {
    check_width("sigma_x_a", sigma_x_a)?;
    check_width("sigma_x_b", sigma_x_b)?;
    let quarter = T::lit(0.25);
    let mut cov = [[T::zero(); 4]; 4];
    cov[0][0] = sigma_x_a * sigma_x_a;
    cov[1][1] = quarter / (sigma_x_a * sigma_x_a);
    cov[2][2] = sigma_x_b * sigma_x_b;
    cov[3][3] = quarter / (sigma_x_b * sigma_x_b);
    GaussianComponent::new(weight, [T::zero(); 4], cov)
}

pub fn make_pure_product_gaussian<T: Real>(sigma_x_a: T, sigma_x_b: T) -> Result<GaussianMixtureState<T>> {
    GaussianMixtureState::new(vec![product_component(T::one(), sigma_x_a, sigma_x_b)?])
}

/// Equal mixture of a state broad in `x` (width `sigma_broad`) and its
/// dual sharp in `x` (width `1 / (2 sigma_broad)`), both separable products.
pub fn make_mixed_xp_example<T: Real>(sigma_broad: T) -> Result<GaussianMixtureState<T>> {
    check_width("sigma_broad", sigma_broad)?;
    let half = T::lit(0.5);
    let sharp = half / sigma_broad;
    GaussianMixtureState::new(vec![
        product_component(half, sharp, sharp)?,
        product_component(half, sigma_broad, sigma_broad)?,
    ])
}

/// Smoothed EPR state with thermal-like parameter `nbar`; separable vacuum at
/// `nbar = 0`, tending to the ideal EPR state as `nbar` grows.
pub fn make_smoothed_epr<T: Real>(nbar: T) -> Result<GaussianMixtureState<T>> {
    if !(nbar >= T::zero()) || !nbar.is_finite() {
        return Err(Error::domain(format!("nbar must be finite and >= 0, got {nbar}")));
    }
    let diag = nbar + T::lit(0.5);
    let corr = (nbar * (nbar + T::one())).sqrt();
    let mut cov = [[T::zero(); 4]; 4];
    for i in 0..4 {
        cov[i][i] = diag;
    }
    cov[0][2] = corr;
    cov[2][0] = corr;
    cov[1][3] = -corr;
    cov[3][1] = -corr;
    GaussianMixtureState::new(vec![GaussianComponent::new(T::one(), [T::zero(); 4], cov)?])
}

pub fn vacuum<T: Real>() -> GaussianMixtureState<T> {
    make_smoothed_epr(T::zero()).expect("vacuum is valid")
}

/// Width `sigma` for which two independent `N(0, sigma^2)` parties are both
/// inside `range` with probability `joint_prob`.
pub fn calibrate_broad_width<T: Real>(joint_prob: T, range: Interval<T>) -> Result<T> {
    if !(joint_prob > T::zero() && joint_prob < T::one()) {
        return Err(Error::domain(format!("joint probability must lie in (0, 1), got {joint_prob}")));
    }
    if !(range.lo.is_finite() && range.hi.is_finite()) {
        return Err(Error::domain("calibration range must be finite"));
    }
    let centre = (range.lo + range.hi) * T::lit(0.5);
    let excess = |s: T| -> T {
        let p = gauss_interval_prob(centre, s, range).expect("positive width");
        p * p - joint_prob
    };
    let mut hi = range.width();
    let mut lo = hi * T::lit(1e-3);
    while excess(hi) > T::zero() {
        lo = hi;
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            return Err(Error::domain("could not bracket calibration width"));
        }
    }
    find_root(excess, Interval::new(lo, hi)?, T::epsilon() * T::lit(4.0))
}
