//! Detector grids, binned joint statistics and the collective difference
//! and sum distributions built from them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bvn_rect_prob, Interval};
use crate::scalar::Real;
use crate::states::MarginalComponent;

/// Relative tolerance for comparing bin widths and lattice offsets.
const LATTICE_TOL: f64 = 1e-9;

/// Uniform finite-range binning of one quadrature axis. Bin `k` covers
/// `[lo + kΔ, lo + (k+1)Δ)` and reports the value at its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGrid<T> {
    lo: T,
    width: T,
    bins: usize,
}

impl<T: Real> DetectorGrid<T> {
    pub fn new(lo: T, hi: T, bins: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::grid(format!("detector range must be finite with lo < hi, got [{lo}, {hi}]")));
        }
        if bins == 0 {
            return Err(Error::grid("a detector needs at least one bin"));
        }
        Ok(Self {
            lo,
            width: (hi - lo) / T::from_usize_lossy(bins),
            bins,
        })
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.edge(self.bins)
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn range(&self) -> Interval<T> {
        Interval {
            lo: self.lo,
            hi: self.hi(),
        }
    }

    /// Left edge of bin `k` (`k = bins` gives the upper range limit).
    pub fn edge(&self, k: usize) -> T {
        self.lo + self.width * T::from_usize_lossy(k)
    }

    pub fn bin(&self, k: usize) -> Interval<T> {
        Interval {
            lo: self.edge(k),
            hi: self.edge(k + 1),
        }
    }

    pub fn center(&self, k: usize) -> T {
        self.lo + self.width * (T::from_usize_lossy(k) + T::lit(0.5))
    }

    /// Bin index of `x`, or `None` outside the detector range. The upper
    /// range limit belongs to the last bin.
    pub fn locate(&self, x: T) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi()) {
            return None;
        }
        let k = ((x - self.lo) / self.width).floor().to_usize().unwrap_or(0);
        Some(k.min(self.bins - 1))
    }

    fn same_width(&self, other: &Self) -> bool {
        (self.width - other.width).abs() <= T::lit(LATTICE_TOL) * self.width
    }
}

/// A detector grid padded with whole bins out to an assumed cutoff beyond
/// which no outcomes occur.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedGrid<T> {
    pub base: DetectorGrid<T>,
    pub cutoff_lo: T,
    pub cutoff_hi: T,
    pub extra_lo: usize,
    pub extra_hi: usize,
}

impl<T: Real> ExtendedGrid<T> {
    /// Extends outward by `ceil(distance / Δ)` bins on each side.
    pub fn new(base: DetectorGrid<T>, cutoff_lo: T, cutoff_hi: T) -> Result<Self> {
        if !(cutoff_lo <= base.lo() && cutoff_hi >= base.hi()) || !cutoff_lo.is_finite() || !cutoff_hi.is_finite() {
            return Err(Error::grid(format!(
                "cutoff [{cutoff_lo}, {cutoff_hi}] must be finite and enclose the detector range [{}, {}]",
                base.lo(),
                base.hi()
            )));
        }
        let whole_bins = |dist: T| -> usize {
            let n = dist / base.width();
            // Absorb rounding so Δ-commensurate cutoffs are not over-extended.
            let slack = T::lit(LATTICE_TOL) * n.max(T::one());
            (n - slack).ceil().max(T::zero()).to_usize().unwrap_or(0)
        };
        Ok(Self {
            base,
            cutoff_lo,
            cutoff_hi,
            extra_lo: whole_bins(base.lo() - cutoff_lo),
            extra_hi: whole_bins(cutoff_hi - base.hi()),
        })
    }

    /// Symmetric cutoff `[-x, x]`.
    pub fn symmetric(base: DetectorGrid<T>, x: T) -> Result<Self> {
        Self::new(base, -x, x)
    }

    /// No extension: the cutoff coincides with the detector edges.
    pub fn unextended(base: DetectorGrid<T>) -> Self {
        Self {
            base,
            cutoff_lo: base.lo(),
            cutoff_hi: base.hi(),
            extra_lo: 0,
            extra_hi: 0,
        }
    }

    /// The padded lattice as a plain grid sharing Δ and alignment with `base`.
    pub fn as_grid(&self) -> DetectorGrid<T> {
        DetectorGrid {
            lo: self.base.lo() - self.base.width() * T::from_usize_lossy(self.extra_lo),
            width: self.base.width(),
            bins: self.base.bins() + self.extra_lo + self.extra_hi,
        }
    }
}

/// Detection probabilities for one basis: entry `(k, l)` is the chance that
/// party a lands in bin `k` and party b in bin `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedJoint<T> {
    probs: Vec<T>,
    rows: usize,
    cols: usize,
    pub detected_mass: T,
    pub missed_mass: T,
}

impl<T: Real> BinnedJoint<T> {
    /// Builds a joint from row-major probabilities; the missed mass is
    /// whatever the entries leave to 1.
    pub fn from_probs(rows: usize, cols: usize, probs: Vec<T>) -> Result<Self> {
        if probs.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::grid(format!("expected {rows}x{cols} entries, got {}", probs.len())));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= T::zero())) {
            return Err(Error::contract(format!("negative or NaN joint probability {p}")));
        }
        let detected: T = probs.iter().copied().sum();
        if detected > T::one() + T::lit(1e-9) {
            return Err(Error::contract(format!("joint probabilities sum to {detected} > 1")));
        }
        Ok(Self {
            probs,
            rows,
            cols,
            detected_mass: detected,
            missed_mass: (T::one() - detected).max(T::zero()),
        })
    }

    /// Empirical joint from per-bin counts out of `total` events; events
    /// not counted in any bin are missed.
    pub fn from_counts(rows: usize, cols: usize, counts: &[u64], total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::Degenerate("no events".into()));
        }
        if counts.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::grid(format!("expected {rows}x{cols} counts, got {}", counts.len())));
        }
        let detected: u64 = counts.iter().sum();
        if detected > total {
            return Err(Error::contract(format!("{detected} binned events out of {total}")));
        }
        let n = T::from_u64(total).expect("count representable");
        let to_prob = |c: u64| T::from_u64(c).expect("count representable") / n;
        Ok(Self {
            probs: counts.iter().map(|&c| to_prob(c)).collect(),
            rows,
            cols,
            detected_mass: to_prob(detected),
            missed_mass: to_prob(total - detected),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, l: usize) -> T {
        self.probs[k * self.cols + l]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.probs.chunks(self.cols).map(|r| r.iter().copied().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        (0..self.cols).map(|l| (0..self.rows).map(|k| self.get(k, l)).sum()).collect()
    }
}

/// Bins a basis marginal onto the two detector grids.
pub fn bin_joint<T: Real>(
    marginal: &[MarginalComponent<T>],
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
) -> Result<BinnedJoint<T>> {
    let total: T = marginal.iter().map(|c| c.weight).sum();
    if marginal.is_empty() || (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::contract(format!("marginal weights sum to {total}, not 1")));
    }
    let (rows, cols) = (grid_a.bins(), grid_b.bins());
    let probs = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let rect = (grid_a.bin(idx / cols), grid_b.bin(idx % cols));
            marginal.iter().try_fold(T::zero(), |acc, c| {
                Ok(acc + c.weight * bvn_rect_prob(c.mean, c.cov, rect)?)
            })
        })
        .collect::<Result<Vec<T>>>()?;
    BinnedJoint::from_probs(rows, cols, probs)
}

/// Probability that at least one party's outcome falls outside its region.
pub fn mass_outside<T: Real>(
    marginal: &[MarginalComponent<T>],
    region_a: Interval<T>,
    region_b: Interval<T>,
) -> Result<T> {
    let inside = marginal.iter().try_fold(T::zero(), |acc, c| {
        Ok::<T, Error>(acc + c.weight * bvn_rect_prob(c.mean, c.cov, (region_a, region_b))?)
    })?;
    Ok((T::one() - inside).max(T::zero()))
}

/// Which collective observable a distribution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collective {
    /// `x_a - x_b`
    Difference,
    /// `p_a + p_b`
    Sum,
}

/// Distribution of a collective outcome on a uniform lattice
/// `origin + i * bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollectiveDistribution<T> {
    pub mode: Collective,
    pub origin: T,
    pub bin_width: T,
    pub probs: Vec<T>,
    /// Both-detected mass the distribution was formed from.
    pub detected_mass: T,
    /// Mass not yet assigned to any outcome.
    pub missed_mass: T,
    /// Mass added by an adversarial fill.
    pub filled_mass: T,
}

impl<T: Real> CollectiveDistribution<T> {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn value(&self, i: usize) -> T {
        self.origin + self.bin_width * T::from_usize_lossy(i)
    }

    pub fn values(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }
}

/// Origin and length of the collective lattice spanned by two grids.
fn lattice<T: Real>(mode: Collective, a: &DetectorGrid<T>, b: &DetectorGrid<T>) -> (T, usize) {
    let origin = match mode {
        Collective::Difference => a.center(0) - b.center(b.bins() - 1),
        Collective::Sum => a.center(0) + b.center(0),
    };
    (origin, a.bins() + b.bins() - 1)
}

/// Accumulates the joint onto the difference or sum lattice, using integer
/// indices `k - l` or `k + l`.
pub fn collective_dist<T: Real>(
    joint: &BinnedJoint<T>,
    mode: Collective,
    grid_a: &DetectorGrid<T>,
    grid_b: &DetectorGrid<T>,
) -> Result<CollectiveDistribution<T>> {
    if joint.rows() != grid_a.bins() || joint.cols() != grid_b.bins() {
        return Err(Error::grid(format!(
            "joint is {}x{} but grids have {} and {} bins",
            joint.rows(),
            joint.cols(),
            grid_a.bins(),
            grid_b.bins()
        )));
    }
    if !grid_a.same_width(grid_b) {
        return Err(Error::grid(format!(
            "bin widths differ ({} vs {}); the outcome lattice would not be uniform",
            grid_a.width(),
            grid_b.width()
        )));
    }
    let (origin, len) = lattice(mode, grid_a, grid_b);
    let mut probs = vec![T::zero(); len];
    let cols = joint.cols();
    for k in 0..joint.rows() {
        for l in 0..cols {
            let i = match mode {
                Collective::Difference => k + cols - 1 - l,
                Collective::Sum => k + l,
            };
            probs[i] = probs[i] + joint.get(k, l);
        }
    }
    Ok(CollectiveDistribution {
        mode,
        origin,
        bin_width: grid_a.width(),
        probs,
        detected_mass: joint.detected_mass,
        missed_mass: joint.missed_mass,
        filled_mass: T::zero(),
    })
}

/// Pads `dist` with empty outcomes covering every value reachable inside the
/// two parties' cutoffs. Already-extended inputs are returned unchanged.
pub fn extend_support<T: Real>(
    dist: &CollectiveDistribution<T>,
    ext_a: &ExtendedGrid<T>,
    ext_b: &ExtendedGrid<T>,
    mode: Collective,
) -> Result<CollectiveDistribution<T>> {
    if dist.mode != mode {
        return Err(Error::grid(format!("distribution is {:?}, requested {:?}", dist.mode, mode)));
    }
    let (ga, gb) = (ext_a.as_grid(), ext_b.as_grid());
    if !ga.same_width(&gb) || (ga.width() - dist.bin_width).abs() > T::lit(LATTICE_TOL) * dist.bin_width {
        return Err(Error::grid("extended grids do not share the distribution's bin width"));
    }
    let (origin, len) = lattice(mode, &ga, &gb);
    let shift = (dist.origin - origin) / dist.bin_width;
    let offset = shift.round();
    if (shift - offset).abs() > T::lit(LATTICE_TOL) * offset.abs().max(T::one()) || offset < T::zero() {
        return Err(Error::grid("distribution is not aligned with the extended lattice"));
    }
    let offset = offset.to_usize().unwrap_or(0);
    if offset + dist.len() > len {
        return Err(Error::grid("distribution extends beyond the cutoff lattice"));
    }
    let mut probs = vec![T::zero(); len];
    probs[offset..offset + dist.len()].copy_from_slice(&dist.probs);
    Ok(CollectiveDistribution {
        origin,
        probs,
        ..dist.clone()
    })
}
