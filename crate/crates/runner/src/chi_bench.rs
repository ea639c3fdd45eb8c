//! Bond-dimension convergence check: the same ensemble (same trajectory keys)
//! at several chi, compared on the window entropy and the cluster length.

use std::fs;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::{CODE_VERSION, SCHEMA_VERSION};
use crate::config::{BackendChoice, Cell, RunConfig};
use crate::ensemble::{run_cell, thread_pool, GroundStateCache};

/// Agreement threshold in combined standard errors.
pub const AGREEMENT_SIGMAS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiRow {
    pub cell: Cell,
    pub chi: usize,
    pub n_trajectories: usize,
    pub n_failed: usize,
    pub window_average: f64,
    pub window_stderr: f64,
    pub mean_max_cluster: f64,
    pub max_cluster_stderr: f64,
    pub max_discarded_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiComparison {
    pub cell: Cell,
    pub chi_a: usize,
    pub chi_b: usize,
    /// |difference| / sqrt(stderr_a^2 + stderr_b^2); zero when both are identical.
    pub entropy_sigmas: f64,
    pub cluster_sigmas: f64,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub rows: Vec<ChiRow>,
    /// Every chi against the largest one, per cell.
    pub comparisons: Vec<ChiComparison>,
}

impl ChiReport {
    pub fn all_agree(&self) -> bool {
        self.comparisons.iter().all(|c| c.agree)
    }
}

fn sigmas(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    let s = (sa * sa + sb * sb).sqrt();
    if s == 0.0 {
        f64::INFINITY
    } else {
        d / s
    }
}

/// Runs every cell of `cfg` once per chi with the MPS backend. Trajectory
/// keys are shared across chi, so the draws coincide and differences come
/// only from truncation (including sign feedback through the densities).
pub fn chi_benchmark(cfg: &RunConfig, chis: &[usize], workers: usize) -> Result<ChiReport> {
    if chis.len() < 2 {
        bail!("chi benchmark needs at least two bond dimensions, got {chis:?}");
    }
    let pool = thread_pool(workers)?;
    let mut base = cfg.clone();
    base.evolution.backend = BackendChoice::Mps;
    base.validate()?;
    let mut cache = GroundStateCache::default();
    let mut rows = Vec::new();
    for cell in base.cells() {
        for &chi in chis {
            let mut c = base.clone();
            c.evolution.chi_max = chi;
            log::info!("chi benchmark: {} at chi={chi}", cell.key());
            let out = run_cell(&c, &cell, &mut cache, &pool)?;
            let s = &out.summary;
            let max_discarded_weight = out
                .records
                .iter()
                .flat_map(|r| r.intervals.iter().map(|i| i.discarded_weight_max))
                .fold(0.0, f64::max);
            rows.push(ChiRow {
                cell,
                chi,
                n_trajectories: s.n_trajectories,
                n_failed: s.n_failed,
                window_average: s.window_average,
                window_stderr: s.window_stderr,
                mean_max_cluster: s.mean_max_cluster,
                max_cluster_stderr: s.max_cluster_stderr,
                max_discarded_weight,
            });
        }
    }
    let top = *chis.iter().max().unwrap();
    let mut comparisons = Vec::new();
    for cell in base.cells() {
        let reference = rows.iter().find(|r| r.cell == cell && r.chi == top).unwrap();
        for r in rows.iter().filter(|r| r.cell == cell) {
            if std::ptr::eq(r, reference) {
                continue;
            }
            let entropy_sigmas = sigmas(r.window_average, r.window_stderr, reference.window_average, reference.window_stderr);
            let cluster_sigmas =
                sigmas(r.mean_max_cluster, r.max_cluster_stderr, reference.mean_max_cluster, reference.max_cluster_stderr);
            comparisons.push(ChiComparison {
                cell,
                chi_a: r.chi,
                chi_b: top,
                entropy_sigmas,
                cluster_sigmas,
                agree: entropy_sigmas <= AGREEMENT_SIGMAS && cluster_sigmas <= AGREEMENT_SIGMAS,
            });
        }
    }
    Ok(ChiReport {
        schema_version: SCHEMA_VERSION,
        config_hash: base.hash(),
        code_version: CODE_VERSION.into(),
        rows,
        comparisons,
    })
}

/// Writes `chi_benchmark.json` and `chi_benchmark.csv` into the output directory.
pub fn write_report(cfg: &RunConfig, report: &ChiReport) -> Result<()> {
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("chi_benchmark.json"), serde_json::to_string_pretty(report)?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "config_hash",
        "code_version",
        "L",
        "delta",
        "P",
        "M",
        "chi",
        "R",
        "n_failed",
        "S_window",
        "S_window_stderr",
        "C",
        "C_stderr",
        "max_discarded_weight",
    ])?;
    for r in &report.rows {
        w.write_record(&[
            report.config_hash.clone(),
            report.code_version.clone(),
            r.cell.l.to_string(),
            r.cell.delta.to_string(),
            r.cell.probability.to_string(),
            r.cell.strength.to_string(),
            r.chi.to_string(),
            r.n_trajectories.to_string(),
            r.n_failed.to_string(),
            r.window_average.to_string(),
            r.window_stderr.to_string(),
            r.mean_max_cluster.to_string(),
            r.max_cluster_stderr.to_string(),
            r.max_discarded_weight.to_string(),
        ])?;
    }
    fs::write(dir.join("chi_benchmark.csv"), w.into_inner()?)?;
    Ok(())
}
