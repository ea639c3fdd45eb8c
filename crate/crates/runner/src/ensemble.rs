//! Ground-state caching and parallel execution of one cell's trajectories.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use anyhow::{Context, Result};
use rayon::prelude::*;

use monitored_core::dmrg::dmrg;
use monitored_core::exact::{dense_ground_state, dense_trajectory};
use monitored_core::model::build_h0;
use monitored_core::mps::MpsState;
use monitored_core::observables::{ensemble_average, EnsembleSummary};
use monitored_core::protocol::{run_trajectory, TrajectoryRecord};
use monitored_core::rng::RngPolicy;
use monitored_core::C64;

use crate::config::{Cell, RunConfig};

/// Fraction of failed trajectories above which a cell is marked degraded.
pub const DEGRADED_FRACTION: f64 = 0.1;

#[derive(Clone)]
pub enum GroundState {
    Mps(MpsState),
    Dense(Vec<C64>),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct GsKey {
    l: usize,
    delta: u64,
    filling: usize,
    chi: usize,
    exact: bool,
}

/// Ground states keyed by (L, Delta, filling, chi, backend).
#[derive(Default)]
pub struct GroundStateCache {
    states: HashMap<GsKey, GroundState>,
}

impl GroundStateCache {
    pub fn get(&mut self, cfg: &RunConfig, cell: &Cell) -> Result<&GroundState> {
        let model = cfg.model_for(cell);
        let exact = cfg.uses_exact(cell);
        let key = GsKey {
            l: cell.l,
            delta: cell.delta.to_bits(),
            filling: model.particles(),
            chi: if exact { 0 } else { cfg.ground_state.chi_max },
            exact,
        };
        if let Entry::Vacant(slot) = self.states.entry(key) {
            let gs = if exact {
                GroundState::Dense(dense_ground_state(&model)?.vector)
            } else {
                let h0 = build_h0(&model)?;
                let res = dmrg(&h0, &model, &cfg.dmrg_options())?;
                if !res.converged {
                    log::warn!("DMRG for {} stopped before reaching e_tol", cell.key());
                }
                GroundState::Mps(res.state)
            };
            slot.insert(gs);
        }
        Ok(&self.states[&key])
    }
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().context("building worker pool")
}

/// Runs all trajectories of `cell`; the result is ordered by trajectory id
/// and independent of the worker count.
pub fn run_cell_trajectories(
    cfg: &RunConfig,
    cell: &Cell,
    gs: &GroundState,
    pool: &rayon::ThreadPool,
) -> Vec<TrajectoryRecord> {
    let model = cfg.model_for(cell);
    let meas = cfg.measurement_for(cell);
    let evo = cfg.evolution_for(cell);
    let seed = cfg.ensemble.master_seed;
    pool.install(|| {
        (0..cfg.ensemble.trajectories as u64)
            .into_par_iter()
            .map(|id| {
                let rng = RngPolicy::new(seed, id);
                match gs {
                    GroundState::Mps(psi) => run_trajectory(psi, &model, &meas, &evo, rng),
                    GroundState::Dense(v) => dense_trajectory(v, &model, &meas, evo.dt, rng),
                }
            })
            .collect()
    })
}

pub struct CellOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub summary: EnsembleSummary,
    pub degraded: bool,
}

pub fn run_cell(cfg: &RunConfig, cell: &Cell, cache: &mut GroundStateCache, pool: &rayon::ThreadPool) -> Result<CellOutcome> {
    let gs = cache.get(cfg, cell).with_context(|| format!("ground state for {}", cell.key()))?;
    let records = run_cell_trajectories(cfg, cell, gs, pool);
    for r in records.iter().filter(|r| r.failed()) {
        log::warn!("{} trajectory {} failed: {:?}", cell.key(), r.header.trajectory_id, r.failure);
    }
    let summary = ensemble_average(&records, &cfg.summary_options()).with_context(|| format!("summarizing {}", cell.key()))?;
    let degraded = summary.n_failed as f64 > DEGRADED_FRACTION * records.len() as f64;
    Ok(CellOutcome { records, summary, degraded })
}
