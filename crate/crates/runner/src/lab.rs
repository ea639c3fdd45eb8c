//! Single-site lab export: Monte Carlo average next to the matching
//! deterministic evolution (Lindblad for the conventional protocol, the
//! nonlinear master equation for the non-Hermitian one).

use std::io::Write;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use monitored_core::single_site::{
    default_ode_dt, lindblad_evolve, monte_carlo_average, nonlinear_master_evolve, Qubit, SingleSiteProtocol,
    SingleSiteState,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    /// Initial occupation |alpha|^2 of a real superposition.
    pub occupation: f64,
    pub strength: f64,
    pub interval: f64,
    pub steps: usize,
    pub trials: usize,
    pub protocol: SingleSiteProtocol,
    pub seed: u64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            occupation: 0.3,
            strength: 0.05,
            interval: 1.0,
            steps: 4,
            trials: 10_000,
            protocol: SingleSiteProtocol::Nonhermitian,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabRow {
    pub t: f64,
    pub a: f64,
    pub re_b: f64,
    pub im_b: f64,
    /// "mc" or "ode".
    pub source: String,
}

/// Monte Carlo rows at every step boundary followed by ODE rows, fifty per
/// measurement step.
pub fn lab_rows(cfg: &LabConfig) -> Result<Vec<LabRow>> {
    let q0 = Qubit::with_occupation(cfg.occupation)?;
    let mc = monte_carlo_average(&q0, cfg.strength, cfg.interval, cfg.steps, cfg.trials, cfg.protocol, cfg.seed)?;
    let row = |t: f64, s: &SingleSiteState, source: &str| LabRow { t, a: s.a, re_b: s.b.re, im_b: s.b.im, source: source.into() };
    let mut rows: Vec<LabRow> = mc.times.iter().zip(&mc.mean).map(|(t, s)| row(*t, s, "mc")).collect();
    let t_end = cfg.steps as f64 * cfg.interval;
    let dt = default_ode_dt(cfg.strength, cfg.interval);
    let ode = match cfg.protocol {
        SingleSiteProtocol::Conventional => lindblad_evolve(q0.density(), cfg.strength, cfg.interval, t_end, dt)?,
        SingleSiteProtocol::Nonhermitian => nonlinear_master_evolve(q0.density(), cfg.strength, cfg.interval, t_end, dt)?,
    };
    // Fifty ODE samples per measurement step are plenty for plotting.
    let stride = ((cfg.interval / 50.0 / dt).round() as usize).max(1);
    rows.extend(ode.iter().step_by(stride).map(|(t, s)| row(*t, s, "ode")));
    Ok(rows)
}

pub fn write_lab_csv<W: Write>(rows: &[LabRow], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
