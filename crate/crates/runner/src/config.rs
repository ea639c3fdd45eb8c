//! Run configuration: TOML sections mirroring the physics, evolution,
//! ensemble, sweep and output settings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use monitored_core::dmrg::DmrgOptions;
use monitored_core::model::{MeasurementSpec, ModelSpec, SignPolicy};
use monitored_core::observables::{SummaryOptions, CLUSTER_THRESHOLD};
use monitored_core::tdvp::{EvolutionConfig, HybridPolicy};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "MONITORED_WORKERS";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    #[default]
    Mps,
    /// Exact statevector for every cell (L <= 14).
    Exact,
    /// Exact statevector when L <= 12, MPS otherwise.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub l: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub hopping: f64,
    #[serde(default)]
    pub filling: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub strength: f64,
    pub probability: f64,
    #[serde(default = "one")]
    pub interval: f64,
    #[serde(default = "default_t_off")]
    pub t_off: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub sign_policy: SignPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    #[serde(default)]
    pub backend: BackendChoice,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Lower `dt` to `0.1 min(1/M, T)` for cells where it is too large
    /// instead of rejecting the configuration.
    #[serde(default)]
    pub clamp_dt: bool,
    #[serde(default = "default_chi")]
    pub chi_max: usize,
    #[serde(default = "default_weight_floor")]
    pub weight_floor: f64,
    #[serde(default)]
    pub hybrid_policy: HybridPolicy,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Mps,
            dt: default_dt(),
            clamp_dt: false,
            chi_max: default_chi(),
            weight_floor: default_weight_floor(),
            hybrid_policy: HybridPolicy::default(),
            krylov_dim: default_krylov_dim(),
            krylov_tol: default_krylov_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSection {
    #[serde(default = "default_gs_chi")]
    pub chi_max: usize,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_e_tol")]
    pub e_tol: f64,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        Self { chi_max: default_gs_chi(), max_sweeps: default_sweeps(), e_tol: default_e_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { trajectories: default_trajectories(), master_seed: 0 }
    }
}

/// Optional grids; an empty list means the single value from `model` / `measurement`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub strengths: Vec<f64>,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write one JSONL file per trajectory.
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_cluster_time")]
    pub cluster_time: f64,
    #[serde(default = "default_threshold")]
    pub cluster_threshold: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            trajectories: true,
            window: default_window(),
            cluster_time: default_cluster_time(),
            cluster_threshold: default_threshold(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub measurement: MeasurementSection,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_delta() -> f64 {
    -0.5
}
fn default_t_off() -> f64 {
    50.0
}
fn default_t_end() -> f64 {
    60.0
}
fn default_dt() -> f64 {
    0.005
}
fn default_chi() -> usize {
    64
}
fn default_weight_floor() -> f64 {
    1e-12
}
fn default_krylov_dim() -> usize {
    20
}
fn default_krylov_tol() -> f64 {
    1e-10
}
fn default_gs_chi() -> usize {
    128
}
fn default_sweeps() -> usize {
    20
}
fn default_e_tol() -> f64 {
    1e-10
}
fn default_trajectories() -> usize {
    40
}
fn default_dir() -> PathBuf {
    PathBuf::from("artifacts")
}
fn default_window() -> [f64; 2] {
    [40.0, 50.0]
}
fn default_cluster_time() -> f64 {
    50.0
}
fn default_threshold() -> f64 {
    CLUSTER_THRESHOLD
}

/// One (L, Delta, P, M) point of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub l: usize,
    pub delta: f64,
    pub probability: f64,
    pub strength: f64,
}

impl Cell {
    /// Stable directory / manifest key.
    pub fn key(&self) -> String {
        format!("L{}_D{}_P{}_M{}", self.l, self.delta, self.probability, self.strength)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("parsing run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hash of everything that affects results (the output section is excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        let canonical = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let sizes = if self.sweep.sizes.is_empty() { vec![self.model.l] } else { self.sweep.sizes.clone() };
        let mut out = Vec::new();
        for &l in &sizes {
            for &delta in &or(&self.sweep.deltas, self.model.delta) {
                for &probability in &or(&self.sweep.probabilities, self.measurement.probability) {
                    for &strength in &or(&self.sweep.strengths, self.measurement.strength) {
                        out.push(Cell { l, delta, probability, strength });
                    }
                }
            }
        }
        out
    }

    pub fn model_for(&self, cell: &Cell) -> ModelSpec {
        ModelSpec { l: cell.l, hopping: self.model.hopping, delta: cell.delta, filling: self.model.filling }
    }

    pub fn measurement_for(&self, cell: &Cell) -> MeasurementSpec {
        let m = &self.measurement;
        MeasurementSpec {
            strength: cell.strength,
            probability: cell.probability,
            interval: m.interval,
            t_off: m.t_off,
            t_end: m.t_end,
            sign_policy: m.sign_policy,
        }
    }

    pub fn dt_for(&self, cell: &Cell) -> f64 {
        let meas = self.measurement_for(cell);
        if self.evolution.clamp_dt {
            self.evolution.dt.min(meas.max_dt())
        } else {
            self.evolution.dt
        }
    }

    pub fn evolution_for(&self, cell: &Cell) -> EvolutionConfig {
        let e = &self.evolution;
        EvolutionConfig {
            dt: self.dt_for(cell),
            chi_max: e.chi_max,
            weight_floor: e.weight_floor,
            hybrid_policy: e.hybrid_policy,
            krylov_dim: e.krylov_dim,
            krylov_tol: e.krylov_tol,
        }
    }

    pub fn dmrg_options(&self) -> DmrgOptions {
        DmrgOptions {
            chi_max: self.ground_state.chi_max,
            max_sweeps: self.ground_state.max_sweeps,
            e_tol: self.ground_state.e_tol,
            ..DmrgOptions::default()
        }
    }

    pub fn summary_options(&self) -> SummaryOptions {
        SummaryOptions {
            window: (self.output.window[0], self.output.window[1]),
            cluster_time: self.output.cluster_time,
            threshold: self.output.cluster_threshold,
        }
    }

    pub fn uses_exact(&self, cell: &Cell) -> bool {
        match self.evolution.backend {
            BackendChoice::Mps => false,
            BackendChoice::Exact => true,
            BackendChoice::Oracle => cell.l <= 12,
        }
    }

    /// Checks every cell against the physics and protocol constraints.
    pub fn validate(&self) -> Result<()> {
        if self.ensemble.trajectories == 0 {
            bail!("ensemble.trajectories must be positive");
        }
        let [w0, w1] = self.output.window;
        if !(w0 <= w1) || w1 > self.measurement.t_end + 1e-9 {
            bail!("output.window [{w0}, {w1}] must be ordered and end before t_end = {}", self.measurement.t_end);
        }
        if self.output.cluster_time > self.measurement.t_end + 1e-9 {
            bail!("output.cluster_time {} lies after t_end", self.output.cluster_time);
        }
        self.evolution_for(&self.cells()[0]).validate()?;
        for cell in self.cells() {
            let model = self.model_for(&cell);
            model.validate().with_context(|| format!("cell {}", cell.key()))?;
            let meas = self.measurement_for(&cell);
            meas.validate().with_context(|| format!("cell {}", cell.key()))?;
            meas.check_dt(self.dt_for(&cell)).with_context(|| format!("cell {}", cell.key()))?;
            if self.uses_exact(&cell) && cell.l > 14 {
                bail!("cell {}: the exact backend is limited to L <= 14", cell.key());
            }
        }
        Ok(())
    }
}

/// Worker count from the environment, defaulting to the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
