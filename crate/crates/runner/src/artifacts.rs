//! Artifact directory layout, `run` and `resume`.
//!
//! ```text
//! <dir>/config.toml
//! <dir>/manifest.json                 config hash + completed cell keys
//! <dir>/summary.csv                   one row per cell
//! <dir>/phase_boundary.json           S_window - S_0 grids and boundary polylines
//! <dir>/cells/<key>/summary.json
//! <dir>/cells/<key>/entropy.csv       t, mean entropy, cluster length, errors
//! <dir>/cells/<key>/trajectories/traj_<id>.jsonl
//! ```
//!
//! Nothing written depends on wall-clock time or worker scheduling.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use monitored_core::observables::{phase_boundary, phase_predicates, EnsembleSummary, PhasePredicates};

use crate::config::{Cell, RunConfig};
use crate::ensemble::{run_cell, thread_pool, GroundStateCache};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub completed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub cell: Cell,
    pub backend: String,
    pub dt: f64,
    /// Zero for the exact backend.
    pub chi_max: usize,
    pub degraded: bool,
    pub summary: EnsembleSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGroup {
    pub l: usize,
    pub delta: f64,
    pub probabilities: Vec<f64>,
    pub strengths: Vec<f64>,
    /// `values[i][j]` = window entropy minus initial entropy at `(probabilities[i], strengths[j])`.
    pub values: Vec<Vec<f64>>,
    /// `[P, M]` points where the value crosses zero.
    pub boundary: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundaryFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    pub groups: Vec<BoundaryGroup>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub cells: Vec<CellSummary>,
    pub predicates: Vec<PhasePredicates>,
    /// Cells executed in this invocation (the rest were already complete).
    pub executed: usize,
}

impl RunReport {
    pub fn degraded(&self) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.degraded).collect()
    }

    pub fn cell(&self, l: usize, delta: f64, probability: f64, strength: f64) -> Option<&CellSummary> {
        self.cells.iter().find(|c| {
            c.cell.l == l && c.cell.delta == delta && c.cell.probability == probability && c.cell.strength == strength
        })
    }
}

/// Writes through a temporary file and a rename so interrupted runs never
/// leave truncated artifacts behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn cell_dir(dir: &Path, cell: &Cell) -> PathBuf {
    dir.join("cells").join(cell.key())
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    let m: Manifest = serde_json::from_str(&text).with_context(|| format!("corrupted manifest {}", path.display()))?;
    if m.schema_version != SCHEMA_VERSION {
        bail!("manifest {} has schema version {}, expected {SCHEMA_VERSION}", path.display(), m.schema_version);
    }
    Ok(Some(m))
}

pub fn read_cell_summary(dir: &Path, cell: &Cell) -> Result<CellSummary> {
    let path = cell_dir(dir, cell).join("summary.json");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("corrupted cell summary {}", path.display()))
}

fn write_entropy_csv(path: &Path, s: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "mean_entropy_bits", "entropy_stderr", "mean_max_cluster", "max_cluster_stderr"])?;
    for i in 0..s.times.len() {
        w.write_record(&[
            s.times[i].to_string(),
            s.mean_entropy_bits[i].to_string(),
            s.entropy_stderr[i].to_string(),
            s.mean_max_cluster_series[i].to_string(),
            s.max_cluster_stderr_series[i].to_string(),
        ])?;
    }
    write_atomic(path, &w.into_inner()?)
}

fn write_cell(dir: &Path, cfg: &RunConfig, cell: &Cell, outcome: &crate::ensemble::CellOutcome, hash: &str) -> Result<CellSummary> {
    let cdir = cell_dir(dir, cell);
    fs::create_dir_all(&cdir)?;
    if cfg.output.trajectories {
        let tdir = cdir.join("trajectories");
        fs::create_dir_all(&tdir)?;
        for r in &outcome.records {
            let mut buf = Vec::new();
            r.write_jsonl(BufWriter::new(&mut buf))?;
            write_atomic(&tdir.join(format!("traj_{:04}.jsonl", r.header.trajectory_id)), &buf)?;
        }
    }
    write_entropy_csv(&cdir.join("entropy.csv"), &outcome.summary)?;
    let summary = CellSummary {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.to_string(),
        code_version: CODE_VERSION.to_string(),
        cell: *cell,
        backend: if cfg.uses_exact(cell) { "exact" } else { "mps" }.to_string(),
        dt: cfg.dt_for(cell),
        chi_max: if cfg.uses_exact(cell) { 0 } else { cfg.evolution.chi_max },
        degraded: outcome.degraded,
        summary: outcome.summary.clone(),
    };
    write_atomic(&cdir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

/// Predicates per cell; the size comparison uses the next smaller L in the
/// sweep with the same (Delta, P, M).
pub fn predicates_for(cells: &[CellSummary]) -> Vec<PhasePredicates> {
    cells
        .iter()
        .map(|c| {
            let smaller = cells
                .iter()
                .filter(|o| {
                    o.cell.l < c.cell.l
                        && o.cell.delta == c.cell.delta
                        && o.cell.probability == c.cell.probability
                        && o.cell.strength == c.cell.strength
                })
                .max_by_key(|o| o.cell.l);
            phase_predicates(&c.summary, smaller.map(|o| &o.summary))
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_summary_csv(dir: &Path, hash: &str, cells: &[CellSummary], preds: &[PhasePredicates]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "config_hash",
        "code_version",
        "L",
        "delta",
        "P",
        "M",
        "backend",
        "chi_max",
        "dt",
        "R",
        "n_failed",
        "degraded",
        "S_initial",
        "S_window",
        "S_window_stderr",
        "C",
        "C_stderr",
        "exceeds_initial",
        "exceeds_initial_sigma",
        "grows_with_L",
        "grows_with_L_sigma",
    ])?;
    for (c, p) in cells.iter().zip(preds) {
        let s = &c.summary;
        w.write_record(&[
            hash.to_string(),
            CODE_VERSION.to_string(),
            c.cell.l.to_string(),
            c.cell.delta.to_string(),
            c.cell.probability.to_string(),
            c.cell.strength.to_string(),
            c.backend.clone(),
            c.chi_max.to_string(),
            c.dt.to_string(),
            s.n_trajectories.to_string(),
            s.n_failed.to_string(),
            c.degraded.to_string(),
            s.initial_entropy.to_string(),
            s.window_average.to_string(),
            s.window_stderr.to_string(),
            s.mean_max_cluster.to_string(),
            s.max_cluster_stderr.to_string(),
            p.exceeds_initial.to_string(),
            p.exceeds_initial_sigma.to_string(),
            opt(p.grows_with_l),
            opt(p.grows_with_l_sigma),
        ])?;
    }
    write_atomic(&dir.join("summary.csv"), &w.into_inner()?)
}

fn boundary_groups(cells: &[CellSummary]) -> Result<Vec<BoundaryGroup>> {
    let mut groups: BTreeMap<(usize, u64), Vec<&CellSummary>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.cell.l, c.cell.delta.to_bits())).or_default().push(c);
    }
    let mut out = Vec::new();
    for ((l, _), members) in groups {
        let mut ps: Vec<f64> = members.iter().map(|c| c.cell.probability).collect();
        let mut ms: Vec<f64> = members.iter().map(|c| c.cell.strength).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        ms.sort_by(f64::total_cmp);
        ms.dedup();
        let mut values = vec![vec![f64::NAN; ms.len()]; ps.len()];
        for c in &members {
            let i = ps.iter().position(|&p| p == c.cell.probability).unwrap();
            let j = ms.iter().position(|&m| m == c.cell.strength).unwrap();
            values[i][j] = c.summary.window_average - c.summary.initial_entropy;
        }
        let boundary = if values.iter().flatten().all(|v| v.is_finite()) {
            phase_boundary(&ps, &ms, &values)?.into_iter().map(|(p, m)| [p, m]).collect()
        } else {
            Vec::new()
        };
        out.push(BoundaryGroup { l, delta: members[0].cell.delta, probabilities: ps, strengths: ms, values, boundary });
    }
    Ok(out)
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(m)?.as_bytes())
}

/// Executes every cell of `cfg` not yet recorded as complete in the output
/// directory, then rewrites the aggregate files. Refuses to reuse a directory
/// that belongs to a different configuration.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let hash = cfg.hash();
    let mut manifest = match read_manifest(&dir)? {
        Some(m) if m.config_hash != hash => {
            bail!("{} holds results for configuration {}, not {hash}", dir.display(), m.config_hash)
        }
        Some(m) => m,
        None => Manifest { schema_version: SCHEMA_VERSION, config_hash: hash.clone(), code_version: CODE_VERSION.into(), completed: Vec::new() },
    };
    write_atomic(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    write_manifest(&dir, &manifest)?;

    let pool = thread_pool(workers)?;
    let mut cache = GroundStateCache::default();
    let mut cells = Vec::new();
    let mut executed = 0;
    for cell in cfg.cells() {
        let key = cell.key();
        if manifest.completed.contains(&key) {
            cells.push(read_cell_summary(&dir, &cell)?);
            continue;
        }
        log::info!("running cell {key} ({} trajectories)", cfg.ensemble.trajectories);
        let outcome = run_cell(cfg, &cell, &mut cache, &pool)?;
        if outcome.degraded {
            log::warn!("cell {key} degraded: {} of {} trajectories failed", outcome.summary.n_failed, cfg.ensemble.trajectories);
        }
        cells.push(write_cell(&dir, cfg, &cell, &outcome, &hash)?);
        manifest.completed.push(key);
        write_manifest(&dir, &manifest)?;
        executed += 1;
    }
    let predicates = predicates_for(&cells);
    write_summary_csv(&dir, &hash, &cells, &predicates)?;
    let pb = PhaseBoundaryFile {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        code_version: CODE_VERSION.into(),
        groups: boundary_groups(&cells)?,
    };
    write_atomic(&dir.join("phase_boundary.json"), serde_json::to_string_pretty(&pb)?.as_bytes())?;
    Ok(RunReport { dir, cells, predicates, executed })
}

/// Continues the run stored in `dir`, skipping completed cells.
pub fn resume(dir: &Path, workers: usize) -> Result<RunReport> {
    let manifest = read_manifest(dir)?.with_context(|| format!("{} has no manifest.json", dir.display()))?;
    let mut cfg = RunConfig::load(&dir.join("config.toml"))?;
    if cfg.hash() != manifest.config_hash {
        bail!("config.toml in {} does not match the manifest hash {}", dir.display(), manifest.config_hash);
    }
    cfg.output.dir = dir.to_path_buf();
    run(&cfg, workers)
}

