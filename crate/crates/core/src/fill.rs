//! Worst-case assignment of missed probability mass.
//!
//! A verifier that only sees both-detected events must assume the missed
//! events landed wherever they hurt most: at the two extreme outcomes for
//! a variance criterion, spread as evenly as possible for an entropic one.

use serde::{Deserialize, Serialize};

use crate::binning::CollectiveDistribution;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillKind {
    /// Discard missed mass and renormalize the detected data. Unsound;
    /// kept to reproduce the false positive it causes.
    #[serde(rename = "naive")]
    NoneNaiveRenormalize,
    VarianceWorst,
    EntropyWorst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillStrategy {
    #[serde(rename = "fill")]
    pub kind: FillKind,
    /// Place missed mass inside the detector range only, skipping the
    /// cutoff extension.
    #[serde(default)]
    pub clip_to_detector: bool,
}

impl FillStrategy {
    pub fn naive() -> Self {
        Self {
            kind: FillKind::NoneNaiveRenormalize,
            clip_to_detector: false,
        }
    }

    pub fn variance_worst() -> Self {
        Self {
            kind: FillKind::VarianceWorst,
            clip_to_detector: false,
        }
    }

    pub fn entropy_worst() -> Self {
        Self {
            kind: FillKind::EntropyWorst,
            clip_to_detector: false,
        }
    }

    pub fn clipped(self) -> Self {
        Self {
            clip_to_detector: true,
            ..self
        }
    }

    /// Whether the strategy extends the outcome support to the cutoff.
    pub fn extends_support(&self) -> bool {
        self.kind != FillKind::NoneNaiveRenormalize && !self.clip_to_detector
    }
}

fn check_fillable<T: Real>(dist: &CollectiveDistribution<T>) -> Result<T> {
    if dist.is_empty() {
        return Err(Error::domain("cannot fill an empty support"));
    }
    let mu = dist.missed_mass;
    if !(mu >= T::zero() && mu <= T::one()) {
        return Err(Error::contract(format!("missed mass {mu} outside [0, 1]")));
    }
    Ok(mu)
}

/// Fraction of the missed mass sent to the lowest outcome by
/// [`fill_variance_worst`].
///
/// With `f * mu` at `L` and `(1 - f) * mu` at `R`, the variance is a concave
/// quadratic in `f` maximized where the completed mean sits at `(L + R) / 2`.
pub fn variance_worst_split<T: Real>(dist: &CollectiveDistribution<T>) -> Result<T> {
    let mu = check_fillable(dist)?;
    let (lo, hi) = (dist.value(0), dist.value(dist.len() - 1));
    let half = T::lit(0.5);
    if mu == T::zero() || lo == hi {
        return Ok(half);
    }
    let first: T = dist.probs.iter().enumerate().map(|(i, &p)| p * dist.value(i)).sum();
    let f = ((lo + hi) * half - first - mu * hi) / (mu * (lo - hi));
    Ok(f.max(T::zero()).min(T::one()))
}

pub fn fill_variance_worst<T: Real>(dist: &CollectiveDistribution<T>) -> Result<CollectiveDistribution<T>> {
    let mu = check_fillable(dist)?;
    let f = variance_worst_split(dist)?;
    let mut out = dist.clone();
    let last = out.len() - 1;
    out.probs[0] = out.probs[0] + f * mu;
    out.probs[last] = out.probs[last] + (T::one() - f) * mu;
    out.filled_mass = dist.filled_mass + mu;
    out.missed_mass = T::zero();
    Ok(out)
}

/// Water level `λ` with `Σ max(0, λ - p_k) = mu`, found exactly by scanning
/// the sorted probabilities.
pub fn water_level<T: Real>(probs: &[T], mu: T) -> T {
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
    let mut prefix = T::zero();
    for (j, &p) in sorted.iter().enumerate() {
        prefix = prefix + p;
        let level = (mu + prefix) / T::from_usize_lossy(j + 1);
        match sorted.get(j + 1) {
            Some(&next) if level > next => continue,
            _ => return level,
        }
    }
    unreachable!("loop returns on the last element")
}

/// Raises the lowest outcomes to a common level until the missed mass is
/// used up. The result is majorized by every other add-only completion, so
/// it maximizes every Rényi entropy at once.
pub fn fill_entropy_worst<T: Real>(dist: &CollectiveDistribution<T>) -> Result<CollectiveDistribution<T>> {
    let mu = check_fillable(dist)?;
    let mut out = dist.clone();
    if mu > T::zero() {
        let level = water_level(&dist.probs, mu);
        for p in out.probs.iter_mut() {
            *p = p.max(level);
        }
    }
    out.filled_mass = dist.filled_mass + mu;
    out.missed_mass = T::zero();
    Ok(out)
}

/// Applies `strategy` to a distribution whose support has already been
/// extended (or deliberately not, for clipped and naive strategies).
pub fn apply_strategy<T: Real>(
    dist: &CollectiveDistribution<T>,
    strategy: FillStrategy,
) -> Result<CollectiveDistribution<T>> {
    match strategy.kind {
        FillKind::NoneNaiveRenormalize => {
            let total = dist.total();
            if !(total > T::zero()) {
                return Err(Error::Degenerate("no detected mass to renormalize".into()));
            }
            let mut out = dist.clone();
            for p in out.probs.iter_mut() {
                *p = *p / total;
            }
            out.missed_mass = T::zero();
            Ok(out)
        }
        FillKind::VarianceWorst => fill_variance_worst(dist),
        FillKind::EntropyWorst => fill_entropy_worst(dist),
    }
}
