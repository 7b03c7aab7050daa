//! Entanglement verification from coarse-grained, finite-range measurements
//! of two-mode continuous-variable Gaussian states.
//!
//! Detectors only register outcomes inside a finite range. Counts that fall
//! outside are missing, and ignoring them can make a separable state look
//! entangled. This crate builds the binned statistics of Gaussian mixture
//! states, completes them with the worst-case placement of the missed mass
//! for a given criterion, and evaluates the variance-product and
//! Rényi-entropic separability criteria on the result.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod binning;
pub mod criteria;
mod error;
pub mod fill;
pub mod numerics;
pub mod runner;
pub mod sampler;
mod scalar;
pub mod states;

pub use binning::{
    bin_joint, collective_dist, extend_support, mass_outside, BinnedJoint, Collective, CollectiveDistribution,
    DetectorGrid, ExtendedGrid,
};
pub use criteria::{
    coarse_variance_criterion, entropic_at, entropic_lhs, mgvt_raw, optimize_entropic, renyi_entropy,
    renyi_entropy_of, variance_of, CriterionKind, CriterionReport,
};
pub use error::{Error, Result};
pub use fill::{apply_strategy, fill_entropy_worst, fill_variance_worst, FillKind, FillStrategy};
pub use numerics::{bvn_rect_prob, find_root, gauss_interval_prob, minimize_scalar, Interval};
pub use sampler::{empirical_joint, sample_events, EventRecord};
pub use scalar::Real;
pub use states::{
    calibrate_broad_width, make_mixed_xp_example, make_pure_product_gaussian, make_smoothed_epr, vacuum, Basis,
    GaussianComponent, GaussianMixtureState, MarginalComponent,
};

pub type State = GaussianMixtureState<f64>;
pub type Component = GaussianComponent<f64>;
pub type Grid = DetectorGrid<f64>;
pub type Extended = ExtendedGrid<f64>;
pub type Joint = BinnedJoint<f64>;
pub type Distribution = CollectiveDistribution<f64>;
pub type Report = CriterionReport<f64>;
pub type Event = EventRecord<f64>;
pub type Range = Interval<f64>;

/// Joint both-detected probability on `[-2, 2]²` that calibrates the broad
/// component of the mixed example.
pub const MIXED_EXAMPLE_X_DETECTION: f64 = 0.086;
