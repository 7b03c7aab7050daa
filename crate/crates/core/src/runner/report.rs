use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use super::config::RunConfig;
use crate::criteria::CriterionReport;
use crate::error::Result;

/// Rounds to 12 significant digits, the precision of every emitted number.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn round_tree(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64().and_then(|x| serde_json::Number::from_f64(sig12(x))) {
                *n = x;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_tree),
        Value::Object(map) => map.values_mut().for_each(round_tree),
        _ => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisSummary {
    pub detected_mass: f64,
    pub missed_mass: f64,
    /// Outcome bins after any cutoff extension.
    pub support_bins: usize,
    pub added_bins: usize,
    /// Probability, under the configured state, that an outcome lies beyond
    /// the assumed cutoff. A non-negligible value means the cutoff
    /// assumption is false for this state.
    pub mass_beyond_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub x: BasisSummary,
    pub p: BasisSummary,
    pub criterion: CriterionReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub criterion_value: f64,
    pub alpha_opt: Option<f64>,
    pub verified: bool,
    pub detected_mass_x: f64,
    pub detected_mass_p: f64,
}

/// A change of verdict between two adjacent sweep points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub lower: f64,
    pub upper: f64,
    /// Linear interpolation of where the criterion value meets the threshold.
    pub interpolated: f64,
    /// Verdict at `upper`.
    pub verified_above: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub crossings: Vec<Crossing>,
    pub multiple_crossings: bool,
}

impl SweepTable {
    pub fn new(parameter: &str, threshold: f64, rows: Vec<SweepRow>) -> Self {
        let crossings: Vec<Crossing> = rows
            .windows(2)
            .filter(|w| w[0].verified != w[1].verified)
            .map(|w| {
                let (a, b) = (&w[0], &w[1]);
                let (fa, fb) = (a.criterion_value - threshold, b.criterion_value - threshold);
                let t = if fa != fb { fa / (fa - fb) } else { 0.5 };
                Crossing {
                    lower: a.parameter,
                    upper: b.parameter,
                    interpolated: a.parameter + t * (b.parameter - a.parameter),
                    verified_above: b.verified,
                }
            })
            .collect();
        Self {
            parameter: parameter.to_string(),
            multiple_crossings: crossings.len() > 1,
            rows,
            crossings,
        }
    }

    /// Columns: parameter, criterion_value, alpha_opt, verified,
    /// detected_mass_x, detected_mass_p.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("parameter,criterion_value,alpha_opt,verified,detected_mass_x,detected_mass_p\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sig12(r.parameter),
                sig12(r.criterion_value),
                r.alpha_opt.map(|a| sig12(a).to_string()).unwrap_or_default(),
                u8::from(r.verified),
                sig12(r.detected_mass_x),
                sig12(r.detected_mass_p),
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: u64,
    pub seed: u64,
    pub detected_events_x: u64,
    pub detected_events_p: u64,
    /// Too few detections for a finite-sample verdict; the sampled verdict
    /// is forced to "not verified".
    pub insufficient_statistics: bool,
    pub analytic: PointResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<PointResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSummary>,
    pub elapsed_seconds: f64,
}

impl RunReport {
    pub(crate) fn new(cfg: &RunConfig, point: PointResult, start: Instant) -> Self {
        Self {
            tool: "cvverify",
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            point: Some(point),
            sweep: None,
            sample: None,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        round_tree(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    /// Headline verdict: the single point, or the sampled point.
    pub fn criterion(&self) -> Option<&CriterionReport<f64>> {
        self.point.as_ref().map(|p| &p.criterion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: f64, v: f64) -> SweepRow {
        SweepRow {
            parameter: p,
            criterion_value: v,
            alpha_opt: None,
            verified: v < 0.0,
            detected_mass_x: 0.5,
            detected_mass_p: 0.5,
        }
    }

    #[test]
    fn sig12_rounds() {
        assert_eq!(sig12(0.123_456_789_012_345), 0.123_456_789_012);
        assert_eq!(sig12(-1234.567_890_123_45), -1234.567_890_12);
        assert_eq!(sig12(0.0), 0.0);
    }

    #[test]
    fn crossings_are_located_and_flagged() {
        let t = SweepTable::new("cutoff", 0.0, vec![row(1.0, -0.2), row(2.0, 0.2), row(3.0, 0.4)]);
        assert_eq!(t.crossings.len(), 1);
        assert_eq!(t.crossings[0].interpolated, 1.5);
        assert!(!t.crossings[0].verified_above);
        assert!(!t.multiple_crossings);
        let t = SweepTable::new("bins", 0.0, vec![row(1.0, 0.1), row(2.0, -0.1), row(3.0, 0.1)]);
        assert!(t.multiple_crossings);
    }

    #[test]
    fn csv_layout() {
        let t = SweepTable::new("bins", 0.0, vec![row(7.0, -0.004_764_716_684_115_822)]);
        assert_eq!(
            t.to_csv(),
            "parameter,criterion_value,alpha_opt,verified,detected_mass_x,detected_mass_p\n7,-0.00476471668412,,1,0.5,0.5\n"
        );
    }
}
