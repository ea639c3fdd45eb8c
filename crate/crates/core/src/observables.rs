//! Post-processing of trajectory records: cluster lengths, ensemble averages
//! with standard errors, linear fits and the two entropy phase predicates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::protocol::TrajectoryRecord;

pub const CLUSTER_THRESHOLD: f64 = 0.2;
pub const DEFAULT_WINDOW: (f64, f64) = (40.0, 50.0);
pub const DEFAULT_CLUSTER_TIME: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub max_length: usize,
    pub threshold: f64,
}

/// Longest run of consecutive sites that are all within `threshold` of 0
/// (holes) or all within `threshold` of 1 (particles). The two kinds of run
/// never merge.
pub fn max_cluster(densities: &[f64], threshold: f64) -> ClusterStat {
    let mut best = 0;
    let mut run = 0;
    let mut kind = 0i8;
    for &n in densities {
        let k = if n <= threshold {
            -1
        } else if n >= 1.0 - threshold {
            1
        } else {
            0
        };
        run = if k != 0 && k == kind { run + 1 } else { (k != 0) as usize };
        kind = k;
        best = best.max(run);
    }
    ClusterStat { max_length: best, threshold }
}

/// Fraction of sites whose density falls on the same side of 0.5 in both profiles.
pub fn pattern_agreement(a: &[f64], b: &[f64]) -> f64 {
    let same = a.iter().zip(b).filter(|(x, y)| (**x > 0.5) == (**y > 0.5)).count();
    same as f64 / a.len().max(1) as f64
}

/// Mean and standard error (sample std / sqrt(n)). Values are summed in
/// sorted order so the result does not depend on record order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut d: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    d.sort_by(f64::total_cmp);
    let var = d.iter().sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean_entropy_bits: Vec<f64>,
    pub entropy_stderr: Vec<f64>,
    pub mean_max_cluster_series: Vec<f64>,
    pub max_cluster_stderr_series: Vec<f64>,
    /// Cluster statistics at `cluster_time`.
    pub cluster_time: f64,
    pub mean_max_cluster: f64,
    pub max_cluster_stderr: f64,
    pub n_trajectories: usize,
    pub n_failed: usize,
    pub window: (f64, f64),
    /// Per-trajectory time average over the window, then averaged over trajectories.
    pub window_average: f64,
    pub window_stderr: f64,
    /// Entropy at t = 0 (the ground state).
    pub initial_entropy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryOptions {
    pub window: (f64, f64),
    pub cluster_time: f64,
    pub threshold: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, cluster_time: DEFAULT_CLUSTER_TIME, threshold: CLUSTER_THRESHOLD }
    }
}

/// Pointwise ensemble statistics. Failed trajectories are excluded and counted.
pub fn ensemble_average(records: &[TrajectoryRecord], opts: &SummaryOptions) -> Result<EnsembleSummary> {
    let ok: Vec<&TrajectoryRecord> = records.iter().filter(|r| !r.failed()).collect();
    let n_failed = records.len() - ok.len();
    let first = ok.first().ok_or_else(|| Error::InvalidParameter("no successful trajectories to average".into()))?;
    let times = first.times();
    for r in &ok {
        if r.times() != times {
            return Err(Error::Shape("trajectories were sampled at different times".into()));
        }
    }
    let (w0, w1) = opts.window;
    let in_window: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= w0 - 1e-9 && times[i] <= w1 + 1e-9).collect();
    if in_window.is_empty() {
        return Err(Error::InvalidParameter(format!("window [{w0}, {w1}] contains no samples")));
    }
    let cluster_idx = times
        .iter()
        .position(|t| (t - opts.cluster_time).abs() < 1e-9)
        .ok_or_else(|| Error::InvalidParameter(format!("no sample at cluster time {}", opts.cluster_time)))?;

    let mut mean_entropy_bits = Vec::with_capacity(times.len());
    let mut entropy_stderr = Vec::with_capacity(times.len());
    let mut mean_c = Vec::with_capacity(times.len());
    let mut se_c = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let s: Vec<f64> = ok.iter().map(|r| r.intervals[i].entropy_bits).collect();
        let (m, e) = mean_stderr(&s);
        mean_entropy_bits.push(m);
        entropy_stderr.push(e);
        let c: Vec<f64> = ok.iter().map(|r| max_cluster(&r.intervals[i].densities, opts.threshold).max_length as f64).collect();
        let (m, e) = mean_stderr(&c);
        mean_c.push(m);
        se_c.push(e);
    }
    let per_traj: Vec<f64> = ok
        .iter()
        .map(|r| in_window.iter().map(|&i| r.intervals[i].entropy_bits).sum::<f64>() / in_window.len() as f64)
        .collect();
    let (window_average, window_stderr) = mean_stderr(&per_traj);
    Ok(EnsembleSummary {
        initial_entropy: mean_entropy_bits[0],
        times,
        mean_entropy_bits,
        entropy_stderr,
        cluster_time: opts.cluster_time,
        mean_max_cluster: mean_c[cluster_idx],
        max_cluster_stderr: se_c[cluster_idx],
        mean_max_cluster_series: mean_c,
        max_cluster_stderr_series: se_c,
        n_trajectories: ok.len(),
        n_failed,
        window: opts.window,
        window_average,
        window_stderr,
    })
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Shape(format!("{n} abscissae for {} ordinates", y.len())));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!("a fit needs at least 3 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("fit abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let slope_stderr = (rss / (n - 2) as f64 / sxx).sqrt();
    Ok(LinearFit { slope, intercept, slope_stderr, residuals })
}

/// Entropy growth rate `s v_S` from a window of the averaged curve, with
/// optional entropy density `s` (from dS/dL) giving `v_S = s v_S / s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub sv_s: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residuals: Vec<f64>,
    pub s: Option<f64>,
    pub v_s: Option<f64>,
}

impl SlopeEstimate {
    pub fn with_entropy_density(mut self, s: f64) -> Self {
        self.s = Some(s);
        self.v_s = Some(self.sv_s / s);
        self
    }
}

pub fn fit_entropy_slope(summary: &EnsembleSummary, window: (f64, f64)) -> Result<SlopeEstimate> {
    let (t0, t1) = window;
    let last = summary.times.last().copied().unwrap_or(0.0);
    if t0 < -1e-9 || t1 > last + 1e-9 || t1 <= t0 {
        return Err(Error::InvalidParameter(format!("fit window [{t0}, {t1}] outside simulated range [0, {last}]")));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = summary
        .times
        .iter()
        .zip(&summary.mean_entropy_bits)
        .filter(|(t, _)| **t >= t0 - 1e-9 && **t <= t1 + 1e-9)
        .map(|(t, s)| (*t, *s))
        .unzip();
    let fit = linear_fit(&x, &y)?;
    Ok(SlopeEstimate { sv_s: fit.slope, intercept: fit.intercept, window, residuals: fit.residuals, s: None, v_s: None })
}

/// Entropy density `s = dS/dL` from window averages at several sizes.
pub fn entropy_density(sizes: &[usize], window_averages: &[f64]) -> Result<LinearFit> {
    let x: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    linear_fit(&x, window_averages)
}

/// `C ~ L^y` from a log-log fit, with a 95% Student-t interval on `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub residuals: Vec<f64>,
}

pub fn power_law_fit(sizes: &[usize], values: &[f64]) -> Result<PowerLawFit> {
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("power-law fit needs positive values".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|&l| (l as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let dof = (x.len() - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numerical(e.to_string()))?.inverse_cdf(0.975);
    Ok(PowerLawFit {
        exponent: fit.slope,
        prefactor: fit.intercept.exp(),
        stderr: fit.slope_stderr,
        ci95: (fit.slope - t * fit.slope_stderr, fit.slope + t * fit.slope_stderr),
        residuals: fit.residuals,
    })
}

/// The two entropy criteria for the entangling phase, each with its margin
/// in units of the combined standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePredicates {
    /// Window average exceeds the ground-state entropy.
    pub exceeds_initial: bool,
    pub exceeds_initial_sigma: f64,
    /// Window average grows from the smaller to the larger size; absent
    /// without a reference size.
    pub grows_with_l: Option<bool>,
    pub grows_with_l_sigma: Option<f64>,
}

impl PhasePredicates {
    pub fn entangling(&self) -> bool {
        self.exceeds_initial && self.grows_with_l.unwrap_or(true)
    }
}

fn sigma_margin(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// `summary` is the cell at the larger size; `smaller` the same (P, M) at a smaller size.
pub fn phase_predicates(summary: &EnsembleSummary, smaller: Option<&EnsembleSummary>) -> PhasePredicates {
    // ground-state entropy is deterministic, so only the window average carries error
    let d = summary.window_average - summary.initial_entropy;
    let (grows, grows_sigma) = match smaller {
        Some(s) => {
            let diff = summary.window_average - s.window_average;
            let se = (summary.window_stderr.powi(2) + s.window_stderr.powi(2)).sqrt();
            (Some(diff > 0.0), Some(sigma_margin(diff, se)))
        }
        None => (None, None),
    };
    PhasePredicates {
        exceeds_initial: d > 0.0,
        exceeds_initial_sigma: sigma_margin(d, summary.window_stderr),
        grows_with_l: grows,
        grows_with_l_sigma: grows_sigma,
    }
}

/// Points where `value = 0` on a rectangular (P, M) grid, linearly
/// interpolated along both axes. `values[i][j]` belongs to `(ps[i], ms[j])`;
/// typically `S_window - S_initial`. Sorted by P, then M.
pub fn phase_boundary(ps: &[f64], ms: &[f64], values: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    if values.len() != ps.len() || values.iter().any(|row| row.len() != ms.len()) {
        return Err(Error::Shape("phase grid values do not match the axes".into()));
    }
    // strict sign changes between neighbours, plus grid points that sit exactly on zero
    let cross = |x0: f64, x1: f64, v0: f64, v1: f64| -> Option<f64> {
        ((v0 < 0.0 && v1 > 0.0) || (v0 > 0.0 && v1 < 0.0)).then(|| x0 + (x1 - x0) * v0 / (v0 - v1))
    };
    let mut pts = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        for (j, &m) in ms.iter().enumerate() {
            if values[i][j] == 0.0 {
                pts.push((p, m));
            }
            if j + 1 < ms.len() {
                pts.extend(cross(m, ms[j + 1], values[i][j], values[i][j + 1]).map(|x| (p, x)));
            }
            if i + 1 < ps.len() {
                pts.extend(cross(p, ps[i + 1], values[i][j], values[i + 1][j]).map(|x| (x, m)));
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    Ok(pts)
}
