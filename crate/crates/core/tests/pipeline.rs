use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use cvverify::runner::{run, write_outputs, Mode, RunConfig, SampleSpec, SweepRow, SweepTable};
use cvverify::{
    bin_joint, collective_dist, entropic_lhs, extend_support, fill_entropy_worst, make_smoothed_epr,
    optimize_entropic, variance_of, Basis, Collective, Distribution, Extended, FillStrategy, Grid,
};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::from_path(configs().join(name)).unwrap()
}

fn verdict(cfg: &RunConfig) -> (f64, bool) {
    let r = run(cfg, None).unwrap();
    let c = r.criterion().unwrap();
    (c.value, c.entanglement_verified)
}

#[test]
fn shipped_configs_parse_and_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::from_path(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let round = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(round, cfg);
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn analyze_examples() {
    let (v, ok) = verdict(&load("mixed_naive.toml"));
    assert!(ok && (0.03..0.07).contains(&v), "{v}");
    let (v, ok) = verdict(&load("mixed_variance_worst.toml"));
    assert!(!ok && v > 1.0);
    let (v, ok) = verdict(&load("epr_variance_clipped.toml"));
    assert!(!ok && v > 1.0);
    let (v, ok) = verdict(&load("epr_entropic.toml"));
    assert!(ok && v < 0.0);

    let mut vac = load("epr_entropic.toml");
    vac.state = cvverify::runner::StateSpec::SmoothedEpr { nbar: 0.0 };
    assert!(!verdict(&vac).1);
    vac.strategy = FillStrategy::variance_worst();
    vac.criterion.kind = cvverify::CriterionKind::CoarseVariance;
    assert!(!verdict(&vac).1);
}

fn epr_filled(bins: usize, cutoff: f64) -> (Distribution, Distribution) {
    let state = make_smoothed_epr(1.0).unwrap();
    let ext = Extended::symmetric(Grid::new(-2.0, 2.0, bins).unwrap(), cutoff).unwrap();
    let mut out = Vec::new();
    for (basis, mode) in [(Basis::X, Collective::Difference), (Basis::P, Collective::Sum)] {
        let j = bin_joint(&state.marginal(basis), &ext.base, &ext.base).unwrap();
        let d = collective_dist(&j, mode, &ext.base, &ext.base).unwrap();
        let d = extend_support(&d, &ext, &ext, mode).unwrap();
        out.push(fill_entropy_worst(&d).unwrap());
    }
    let p = out.pop().unwrap();
    (out.pop().unwrap(), p)
}

/// Log-spaced orders on `[1/2 + 1e-6, 1e3]` with `α = 1` as a grid point.
fn dense_alphas(n: usize) -> Vec<f64> {
    let (lo, hi) = ((0.5f64 + 1e-6).ln(), 1000f64.ln());
    let below = ((n as f64) * (-lo) / (hi - lo)).round() as usize;
    let mut out: Vec<f64> = (0..below).map(|i| (lo * (1.0 - i as f64 / below as f64)).exp()).collect();
    let above = n - below;
    out.extend((0..above).map(|i| (hi * i as f64 / (above - 1) as f64).exp()));
    out
}

#[test]
fn optimizer_matches_dense_scan_epr() {
    let (dx, dp) = epr_filled(32, 10.0);
    let w = dx.bin_width;
    let opt = optimize_entropic(&dx, &dp, w, w).unwrap();
    let scan = dense_alphas(1000)
        .into_iter()
        .map(|a| entropic_lhs(&dx, &dp, a, w, w).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(opt.value <= scan + 1e-6 && opt.value >= scan - 1e-6, "{} vs {scan}", opt.value);
    let a = opt.alpha_opt.unwrap();
    assert_abs_diff_eq!(opt.value, entropic_lhs(&dx, &dp, a, w, w).unwrap(), epsilon = 1e-15);
}

#[test]
fn optimizer_matches_dense_scan_point_masses() {
    let point = Distribution {
        mode: Collective::Difference,
        origin: 0.0,
        bin_width: 0.5,
        probs: vec![1.0],
        detected_mass: 1.0,
        missed_mass: 0.0,
        filled_mass: 0.0,
    };
    let opt = optimize_entropic(&point, &point, 0.5, 0.5).unwrap();
    let scan = dense_alphas(10_000)
        .into_iter()
        .map(|a| entropic_lhs(&point, &point, a, 0.5, 0.5).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((opt.value - scan).abs() <= 1e-8, "{} vs {scan}", opt.value);
    let expected = -1.0 - (2.0 * std::f64::consts::PI / 0.25).ln();
    assert_abs_diff_eq!(opt.value, expected, epsilon = 1e-8);
}

#[test]
fn fine_grained_variance_converges() {
    let state = make_smoothed_epr(1.0).unwrap();
    let target = 3.0 - 2.0 * 2f64.sqrt();
    let mut last = f64::INFINITY;
    for bins in [64, 128, 256] {
        let g = Grid::new(-10.0, 10.0, bins).unwrap();
        let j = bin_joint(&state.marginal(Basis::X), &g, &g).unwrap();
        let mut d = collective_dist(&j, Collective::Difference, &g, &g).unwrap();
        d.probs.iter_mut().for_each(|p| *p /= j.detected_mass);
        d.missed_mass = 0.0;
        d.detected_mass = 1.0;
        let v = variance_of(&d).unwrap();
        let err = (v - target).abs();
        assert!(err < last, "D={bins}: {v}");
        // Each binned party adds about width^2 / 12.
        assert!((v - target - g.width().powi(2) / 6.0).abs() < 2e-3, "D={bins}: {v}");
        last = err;
    }
    assert!(last < 2e-3);
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

#[test]
fn collective_variance_matches_direct_quadrature() {
    let (n, bins) = (1.0f64, 32usize);
    let (va, c) = (n + 0.5, (n * (n + 1.0)).sqrt());
    let det = va * va - c * c;
    let density = |a: f64, b: f64| (-(va * a * a - 2.0 * c * a * b + va * b * b) / (2.0 * det)).exp()
        / (2.0 * std::f64::consts::PI * det.sqrt());
    let gl = gauss_legendre(12);
    let w = 4.0 / bins as f64;
    let mut diff = vec![0.0; 2 * bins - 1];
    for k in 0..bins {
        for l in 0..bins {
            let (ca, cb) = (-2.0 + (k as f64 + 0.5) * w, -2.0 + (l as f64 + 0.5) * w);
            let mut s = 0.0;
            for &(x, wx) in &gl {
                for &(y, wy) in &gl {
                    s += wx * wy * density(ca + 0.5 * w * x, cb + 0.5 * w * y);
                }
            }
            diff[k + bins - 1 - l] += s * w * w / 4.0;
        }
    }
    let total: f64 = diff.iter().sum();
    let mean: f64 = diff.iter().enumerate().map(|(i, p)| i as f64 * p).sum::<f64>() / total;
    let oracle =
        diff.iter().enumerate().map(|(i, p)| (i as f64 - mean).powi(2) * p).sum::<f64>() / total * w * w;

    let state = make_smoothed_epr(n).unwrap();
    let g = Grid::new(-2.0, 2.0, bins).unwrap();
    let j = bin_joint(&state.marginal(Basis::X), &g, &g).unwrap();
    let d = collective_dist(&j, Collective::Difference, &g, &g).unwrap();
    let filled = cvverify::apply_strategy(&d, FillStrategy::naive()).unwrap();
    assert_abs_diff_eq!(variance_of(&filled).unwrap(), oracle, epsilon = 1e-6);
    assert_abs_diff_eq!(j.detected_mass, total, epsilon = 1e-9);
}

fn sample_cfg(n: u64, seed: u64) -> RunConfig {
    let mut cfg = load("epr_entropic.toml");
    cfg.mode = Some(Mode::Sample);
    cfg.sample = Some(SampleSpec {
        n,
        seed,
        dump_events: None,
        min_detected_events: 1000,
    });
    cfg
}

#[test]
fn large_sample_agrees_with_analytic() {
    let r = run(&sample_cfg(2_000_000, 3), None).unwrap();
    let s = r.sample.as_ref().unwrap();
    let sampled = r.criterion().unwrap();
    assert!(!s.insufficient_statistics);
    assert_eq!(sampled.entanglement_verified, s.analytic.criterion.entanglement_verified);
    assert!((sampled.value - s.analytic.criterion.value).abs() < 0.02);
}

#[test]
fn single_event_is_not_verified() {
    let r = run(&sample_cfg(1, 11), None).unwrap();
    let s = r.sample.as_ref().unwrap();
    assert!(s.insufficient_statistics);
    assert!(!r.criterion().unwrap().entanglement_verified);
}

#[test]
fn sampling_is_deterministic() {
    let strip = |cfg: &RunConfig| {
        let mut r = run(cfg, None).unwrap();
        r.elapsed_seconds = 0.0;
        r.to_json().unwrap()
    };
    let cfg = sample_cfg(300_000, 42);
    assert_eq!(strip(&cfg), strip(&cfg));
    assert_ne!(strip(&cfg), strip(&sample_cfg(300_000, 43)));
}

#[test]
fn outputs_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load("sweep_bins.toml");
    cfg.sweep.as_mut().unwrap().start = Some(5.0);
    cfg.sweep.as_mut().unwrap().stop = Some(9.0);
    let r = run(&cfg, None).unwrap();
    write_outputs(&r, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["sweep"]["crossings"][0]["upper"], 7.0);
}

#[test]
fn multiple_crossings_flagged() {
    let row = |p: f64, v: f64| SweepRow {
        parameter: p,
        criterion_value: v,
        alpha_opt: None,
        verified: v < 0.0,
        detected_mass_x: 1.0,
        detected_mass_p: 1.0,
    };
    let t = SweepTable::new("cutoff", 0.0, vec![row(1.0, 0.5), row(2.0, -0.5), row(3.0, 0.5), row(4.0, 1.0)]);
    assert!(t.multiple_crossings);
    assert_eq!(t.crossings.len(), 2);
    assert_abs_diff_eq!(t.crossings[0].interpolated, 1.5);
    let t = SweepTable::new("cutoff", 0.0, vec![row(1.0, 0.5), row(2.0, -0.5)]);
    assert!(!t.multiple_crossings);
}
