//! Run configuration, read from TOML.
//!
//! ```toml
//! mode = "analyze"            # analyze | sweep_bins | sweep_cutoff | sample
//!
//! [state]
//! kind = "smoothed_epr"       # pure_product | mixed_xp | smoothed_epr
//! nbar = 1.0
//!
//! [grid]                      # both bases; override with [grid_x] / [grid_p]
//! lo = -2.0
//! hi = 2.0
//! bins = 32
//! cutoff = 10.0               # or cutoff_lo / cutoff_hi
//!
//! [strategy]
//! fill = "entropy_worst"      # naive | variance_worst | entropy_worst
//! clip_to_detector = false
//!
//! [criterion]
//! kind = "renyi_entropic"     # mgvt_raw | coarse_variance | renyi_entropic
//! # alpha = 1.0               # fixed order instead of optimizing
//!
//! [sweep]                     # sweep modes: `values`, or start/stop/step
//! start = 2
//! stop = 32
//! step = 1
//!
//! [sample]                    # sample mode
//! n = 10000000
//! seed = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binning::{DetectorGrid, ExtendedGrid};
use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::fill::FillStrategy;
use crate::numerics::Interval;
use crate::states::{
    calibrate_broad_width, make_mixed_xp_example, make_pure_product_gaussian, make_smoothed_epr,
    GaussianMixtureState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analyze,
    SweepBins,
    SweepCutoff,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    PureProduct {
        sigma_x_a: f64,
        sigma_x_b: f64,
    },
    /// Give `sigma_broad` directly, or `joint_detection`: the both-detected
    /// x-basis probability of the broad component on the x detector range.
    MixedXp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_broad: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        joint_detection: Option<f64>,
    },
    SmoothedEpr {
        nbar: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
    /// Symmetric cutoff `[-cutoff, cutoff]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSpec {
    pub kind: CriterionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn default_min_detected() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub n: u64,
    pub seed: u64,
    /// CSV file (relative to the output directory) receiving every event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_events: Option<String>,
    /// Below this many both-detected events in either basis the sampled
    /// verdict is withheld.
    #[serde(default = "default_min_detected")]
    pub min_detected_events: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub state: StateSpec,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_x: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_p: Option<GridSpec>,
    pub strategy: FillStrategy,
    pub criterion: CriterionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl GridSpec {
    pub fn symmetric(lo: f64, hi: f64, bins: usize, cutoff: f64) -> Self {
        Self {
            lo,
            hi,
            bins,
            cutoff: Some(cutoff),
            cutoff_lo: None,
            cutoff_hi: None,
        }
    }

    pub fn detector(&self, field: &str) -> Result<DetectorGrid<f64>> {
        DetectorGrid::new(self.lo, self.hi, self.bins).map_err(|e| Error::config(field, e.to_string()))
    }

    /// Cutoff interval; defaults to the detector edges when none is given.
    pub fn cutoffs(&self, field: &str) -> Result<(f64, f64)> {
        let (lo, hi) = match (self.cutoff, self.cutoff_lo, self.cutoff_hi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::config(
                    format!("{field}.cutoff"),
                    "give either `cutoff` or `cutoff_lo`/`cutoff_hi`, not both",
                ))
            }
            (Some(x), None, None) => (-x, x),
            (None, lo, hi) => (lo.unwrap_or(self.lo), hi.unwrap_or(self.hi)),
        };
        Ok((lo, hi))
    }

    pub fn extended(&self, field: &str) -> Result<ExtendedGrid<f64>> {
        let (lo, hi) = self.cutoffs(field)?;
        ExtendedGrid::new(self.detector(field)?, lo, hi).map_err(|e| Error::config(format!("{field}.cutoff"), e.to_string()))
    }
}

impl StateSpec {
    pub fn build(&self, x_range: Interval<f64>) -> Result<GaussianMixtureState<f64>> {
        let wrap = |e: Error| Error::config("state", e.to_string());
        match *self {
            StateSpec::PureProduct { sigma_x_a, sigma_x_b } => make_pure_product_gaussian(sigma_x_a, sigma_x_b).map_err(wrap),
            StateSpec::SmoothedEpr { nbar } => make_smoothed_epr(nbar).map_err(wrap),
            StateSpec::MixedXp { sigma_broad, joint_detection } => {
                let sigma = self.broad_width(sigma_broad, joint_detection, x_range)?;
                make_mixed_xp_example(sigma).map_err(wrap)
            }
        }
    }

    fn broad_width(&self, sigma: Option<f64>, joint: Option<f64>, x_range: Interval<f64>) -> Result<f64> {
        match (sigma, joint) {
            (Some(s), None) => Ok(s),
            (None, Some(p)) => calibrate_broad_width(p, x_range).map_err(|e| Error::config("state.joint_detection", e.to_string())),
            (None, None) => Ok(calibrate_broad_width(crate::MIXED_EXAMPLE_X_DETECTION, x_range)
                .map_err(|e| Error::config("state.joint_detection", e.to_string()))?),
            (Some(_), Some(_)) => Err(Error::config("state", "give either `sigma_broad` or `joint_detection`, not both")),
        }
    }
}

impl SweepSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        let values = match (&self.values, self.start, self.stop, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), step) => {
                let step = step.unwrap_or(1.0);
                if !(step > 0.0) || !(stop >= start) {
                    return Err(Error::config("sweep", "need step > 0 and stop >= start"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| start + step * i as f64).collect()
            }
            _ => return Err(Error::config("sweep", "give `values`, or `start` and `stop` (optional `step`)")),
        };
        if values.is_empty() {
            return Err(Error::config("sweep.values", "sweep list is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", "sweep values must be finite"));
        }
        Ok(values)
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Analyze)
    }

    pub fn grid_x(&self) -> &GridSpec {
        self.grid_x.as_ref().unwrap_or(&self.grid)
    }

    pub fn grid_p(&self) -> &GridSpec {
        self.grid_p.as_ref().unwrap_or(&self.grid)
    }

    pub(crate) fn grid_field(&self, basis_x: bool) -> &'static str {
        match (basis_x, self.grid_x.is_some(), self.grid_p.is_some()) {
            (true, true, _) => "grid_x",
            (false, _, true) => "grid_p",
            _ => "grid",
        }
    }

    /// Checks every sub-schema, reporting the first offending field.
    pub fn validate(&self) -> Result<()> {
        for basis_x in [true, false] {
            let field = self.grid_field(basis_x);
            let g = if basis_x { self.grid_x() } else { self.grid_p() };
            g.extended(field)?;
        }
        self.state.build(self.grid_x().detector(self.grid_field(true))?.range())?;
        if let Some(alpha) = self.criterion.alpha {
            if self.criterion.kind != CriterionKind::RenyiEntropic {
                return Err(Error::config("criterion.alpha", "a fixed order only applies to renyi_entropic"));
            }
            if !(alpha > 0.5) || !alpha.is_finite() {
                return Err(Error::config("criterion.alpha", format!("order must be finite and > 1/2, got {alpha}")));
            }
        }
        match self.mode() {
            Mode::Analyze => {}
            Mode::SweepBins => {
                let values = self.sweep_values()?;
                if values.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                    return Err(Error::config("sweep.values", "bin counts must be positive integers"));
                }
            }
            Mode::SweepCutoff => {
                let values = self.sweep_values()?;
                for g in [self.grid_x(), self.grid_p()] {
                    let edge = g.lo.abs().max(g.hi.abs());
                    if let Some(v) = values.iter().find(|v| **v < edge) {
                        return Err(Error::config("sweep.values", format!("cutoff {v} lies inside the detector range")));
                    }
                }
            }
            Mode::Sample => {
                let s = self.sample.as_ref().ok_or_else(|| Error::config("sample", "sample mode needs a [sample] table"))?;
                if s.n == 0 {
                    return Err(Error::config("sample.n", "sample size must be at least 1"));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn sweep_values(&self) -> Result<Vec<f64>> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::config("sweep", "sweep modes need a [sweep] table"))?
            .values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPR: &str = r#"
        mode = "analyze"
        [state]
        kind = "smoothed_epr"
        nbar = 1.0
        [grid]
        lo = -2.0
        hi = 2.0
        bins = 32
        cutoff = 10.0
        [strategy]
        fill = "entropy_worst"
        [criterion]
        kind = "renyi_entropic"
    "#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(EPR).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.cutoffs("grid").unwrap(), (-10.0, 10.0));
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn field_level_errors() {
        let bad = EPR.replace("bins = 32", "bins = 0");
        let err = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid"), "{err}");

        let bad = EPR.replace("cutoff = 10.0", "cutoff = 1.0");
        let err = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "grid.cutoff"), "{err}");

        let bad = EPR.replace("nbar = 1.0", "nbar = -1.0");
        let err = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "state"), "{err}");

        let bad = EPR.replace("mode = \"analyze\"", "mode = \"sweep_bins\"");
        let err = RunConfig::from_toml_str(&bad).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "sweep"), "{err}");

        assert!(RunConfig::from_toml_str(&EPR.replace("nbar", "nbarr")).is_err());
    }

    #[test]
    fn sweep_ranges() {
        let s = SweepSpec { start: Some(4.0), stop: Some(10.0), step: Some(2.0), ..Default::default() };
        assert_eq!(s.values().unwrap(), vec![4.0, 6.0, 8.0, 10.0]);
        let s = SweepSpec { values: Some(vec![]), ..Default::default() };
        assert!(s.values().is_err());
    }

    #[test]
    fn mixed_state_calibrates_by_default() {
        let spec = StateSpec::MixedXp { sigma_broad: None, joint_detection: None };
        let st = spec.build(Interval::new(-2.0, 2.0).unwrap()).unwrap();
        let broad = st.components()[1].cov[0][0].sqrt();
        assert!((broad - 5.3158).abs() < 1e-4);
    }
}
