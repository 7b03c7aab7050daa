//! Configuration-driven experiments: single-point analysis, bin-count and
//! cutoff sweeps, and the finite-sample pipeline.

mod config;
mod report;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{CriterionSpec, GridSpec, Mode, OutputSpec, RunConfig, SampleSpec, StateSpec, SweepSpec};
pub use report::{sig12, BasisSummary, Crossing, PointResult, RunReport, SampleSummary, SweepRow, SweepTable};

use crate::binning::{bin_joint, collective_dist, extend_support, mass_outside, BinnedJoint, Collective, ExtendedGrid};
use crate::criteria::{
    coarse_variance_criterion, entropic_at, mgvt_raw, optimize_entropic, variance_of, CriterionKind, CriterionReport,
};
use crate::error::{Error, Result};
use crate::fill::apply_strategy;
use crate::sampler::{for_each_event, sample_joint, EventCsvWriter};
use crate::states::{Basis, GaussianMixtureState};

/// Per-basis geometry resolved from a config.
struct BasisSetup {
    basis: Basis,
    mode: Collective,
    ext: ExtendedGrid<f64>,
}

struct Setup {
    state: GaussianMixtureState<f64>,
    x: BasisSetup,
    p: BasisSetup,
}

impl Setup {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let ext_x = cfg.grid_x().extended(cfg.grid_field(true))?;
        let ext_p = cfg.grid_p().extended(cfg.grid_field(false))?;
        Ok(Self {
            state: cfg.state.build(ext_x.base.range())?,
            x: BasisSetup {
                basis: Basis::X,
                mode: Collective::Difference,
                ext: ext_x,
            },
            p: BasisSetup {
                basis: Basis::P,
                mode: Collective::Sum,
                ext: ext_p,
            },
        })
    }

    fn analytic_joint(&self, b: &BasisSetup) -> Result<BinnedJoint<f64>> {
        bin_joint(&self.state.marginal(b.basis), &b.ext.base, &b.ext.base)
    }
}

fn digest(cfg: &RunConfig, setup: &Setup) -> String {
    let grid = |b: &BasisSetup| {
        let g = &b.ext.base;
        format!(
            "{:?}: [{}, {}] D={} cutoff [{}, {}]",
            b.basis,
            g.lo(),
            g.hi(),
            g.bins(),
            b.ext.cutoff_lo,
            b.ext.cutoff_hi
        )
    };
    format!(
        "{}; {}; fill={} clip_to_detector={}",
        grid(&setup.x),
        grid(&setup.p),
        serde_json::to_value(cfg.strategy.kind).expect("fill kind").as_str().unwrap_or("?"),
        cfg.strategy.clip_to_detector
    )
}

/// Runs completion and the criterion on already-binned joints.
fn evaluate(cfg: &RunConfig, setup: &Setup, jx: &BinnedJoint<f64>, jp: &BinnedJoint<f64>) -> Result<PointResult> {
    let mut summaries = Vec::with_capacity(2);
    let mut filled = Vec::with_capacity(2);
    for (b, joint) in [(&setup.x, jx), (&setup.p, jp)] {
        let base = &b.ext.base;
        let dist = collective_dist(joint, b.mode, base, base)?;
        let raw_len = dist.len();
        let dist = if cfg.strategy.extends_support() {
            extend_support(&dist, &b.ext, &b.ext, b.mode)?
        } else {
            dist
        };
        let completed = apply_strategy(&dist, cfg.strategy)?;
        let cutoff = crate::numerics::Interval::new(b.ext.cutoff_lo, b.ext.cutoff_hi)?;
        summaries.push(BasisSummary {
            detected_mass: joint.detected_mass,
            missed_mass: joint.missed_mass,
            support_bins: completed.len(),
            added_bins: completed.len() - raw_len,
            mass_beyond_cutoff: mass_outside(&setup.state.marginal(b.basis), cutoff, cutoff)?,
        });
        filled.push(completed);
    }
    let (dx, dp) = (setup.x.ext.base.width(), setup.p.ext.base.width());
    let report: CriterionReport<f64> = match cfg.criterion.kind {
        CriterionKind::MgvtRaw => mgvt_raw(variance_of(&filled[0])?, variance_of(&filled[1])?)?,
        CriterionKind::CoarseVariance => {
            coarse_variance_criterion(variance_of(&filled[0])?, variance_of(&filled[1])?, dx, dp)?
        }
        CriterionKind::RenyiEntropic => match cfg.criterion.alpha {
            Some(alpha) => entropic_at(&filled[0], &filled[1], alpha, dx, dp)?,
            None => optimize_entropic(&filled[0], &filled[1], dx, dp)?,
        },
    };
    let p = summaries.pop().expect("two bases");
    let x = summaries.pop().expect("two bases");
    Ok(PointResult {
        x,
        p,
        criterion: report.with_digest(digest(cfg, setup)),
    })
}

/// The analytic pipeline for one configuration point.
pub fn analyze_point(cfg: &RunConfig) -> Result<PointResult> {
    let setup = Setup::new(cfg)?;
    let jx = setup.analytic_joint(&setup.x)?;
    let jp = setup.analytic_joint(&setup.p)?;
    evaluate(cfg, &setup, &jx, &jp)
}

fn require_mode(cfg: &RunConfig, allowed: &[Mode]) -> Result<()> {
    if allowed.contains(&cfg.mode()) {
        Ok(())
    } else {
        Err(Error::config("mode", format!("{:?} cannot be run here", cfg.mode())))
    }
}

pub fn run_analyze(cfg: &RunConfig) -> Result<RunReport> {
    require_mode(cfg, &[Mode::Analyze])?;
    cfg.validate()?;
    let start = Instant::now();
    let point = analyze_point(cfg)?;
    Ok(RunReport::new(cfg, point, start))
}

/// Config for one sweep point.
fn sweep_point(cfg: &RunConfig, mode: Mode, value: f64) -> RunConfig {
    let mut point = cfg.clone();
    point.mode = Some(Mode::Analyze);
    let apply = |g: &mut GridSpec| match mode {
        Mode::SweepBins => g.bins = value as usize,
        _ => {
            g.cutoff = Some(value);
            g.cutoff_lo = None;
            g.cutoff_hi = None;
        }
    };
    apply(&mut point.grid);
    if let Some(g) = point.grid_x.as_mut() {
        apply(g);
    }
    if let Some(g) = point.grid_p.as_mut() {
        apply(g);
    }
    point
}

pub fn run_sweep(cfg: &RunConfig) -> Result<RunReport> {
    require_mode(cfg, &[Mode::SweepBins, Mode::SweepCutoff])?;
    cfg.validate()?;
    let start = Instant::now();
    let mode = cfg.mode();
    let values = cfg.sweep_values()?;
    let points = values
        .par_iter()
        .map(|&v| analyze_point(&sweep_point(cfg, mode, v)))
        .collect::<Result<Vec<PointResult>>>()?;
    let rows: Vec<SweepRow> = values
        .iter()
        .zip(&points)
        .map(|(&parameter, p)| SweepRow {
            parameter,
            criterion_value: p.criterion.value,
            alpha_opt: p.criterion.alpha_opt,
            verified: p.criterion.entanglement_verified,
            detected_mass_x: p.x.detected_mass,
            detected_mass_p: p.p.detected_mass,
        })
        .collect();
    let threshold = points[0].criterion.threshold;
    let table = SweepTable::new(
        if mode == Mode::SweepBins { "bins" } else { "cutoff" },
        threshold,
        rows,
    );
    let mut report = RunReport::new(cfg, points.into_iter().next().expect("nonempty sweep"), start);
    report.point = None;
    report.sweep = Some(table);
    Ok(report)
}

pub fn run_sample(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    require_mode(cfg, &[Mode::Sample])?;
    cfg.validate()?;
    let start = Instant::now();
    let spec = cfg.sample.as_ref().expect("validated");
    let setup = Setup::new(cfg)?;
    let seed_for = |b: Basis| match b {
        Basis::X => spec.seed.wrapping_mul(2),
        Basis::P => spec.seed.wrapping_mul(2).wrapping_add(1),
    };
    if let Some(name) = &spec.dump_events {
        let path = out_dir.map_or_else(|| Path::new(name).to_path_buf(), |d| d.join(name));
        let mut writer = EventCsvWriter::new(BufWriter::new(File::create(path)?))?;
        for b in [&setup.x, &setup.p] {
            let g = &b.ext.base;
            for_each_event(&setup.state, b.basis, spec.n, g, g, seed_for(b.basis), |e| writer.write(e))?;
        }
        writer.finish()?;
    }
    let sampled = |b: &BasisSetup| sample_joint(&setup.state, b.basis, spec.n, &b.ext.base, &b.ext.base, seed_for(b.basis));
    let (jx, jp) = (sampled(&setup.x)?, sampled(&setup.p)?);
    let detected_events = |j: &BinnedJoint<f64>| (j.detected_mass * spec.n as f64).round() as u64;
    let mut point = evaluate(cfg, &setup, &jx, &jp)?;
    let insufficient = detected_events(&jx).min(detected_events(&jp)) < spec.min_detected_events;
    if insufficient {
        point.criterion.entanglement_verified = false;
    }
    let analytic = evaluate(cfg, &setup, &setup.analytic_joint(&setup.x)?, &setup.analytic_joint(&setup.p)?)?;
    let mut report = RunReport::new(cfg, point, start);
    report.sample = Some(SampleSummary {
        n: spec.n,
        seed: spec.seed,
        detected_events_x: detected_events(&jx),
        detected_events_p: detected_events(&jp),
        insufficient_statistics: insufficient,
        analytic,
    });
    Ok(report)
}

/// Dispatches on the config's mode.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    match cfg.mode() {
        Mode::Analyze => run_analyze(cfg),
        Mode::SweepBins | Mode::SweepCutoff => run_sweep(cfg),
        Mode::Sample => run_sample(cfg, out_dir),
    }
}

/// Writes `report.json` and, for sweeps, `sweep.csv` into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    if let Some(table) = &report.sweep {
        std::fs::write(dir.join("sweep.csv"), table.to_csv())?;
    }
    Ok(())
}
