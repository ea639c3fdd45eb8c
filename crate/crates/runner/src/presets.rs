//! Named configurations for the limiting regimes, the cluster studies and the
//! desk-scale phase sweep, plus full-size production runs.

use anyhow::{bail, Result};

use monitored_core::model::SignPolicy;

use crate::config::*;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    /// Production presets need L = 50 class resources (hours to days).
    pub production: bool,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "zeno", description: "strong frequent measurement, M=10 P=1, L=12 exact", production: false },
    Preset { name: "rare-strong", description: "strong rare measurement, M=10 P=0.1, L=12 exact", production: false },
    Preset { name: "weak-frequent", description: "weak frequent measurement, M=0.1 P=1, L=12 exact", production: false },
    Preset { name: "weak-rare", description: "weak rare measurement, M=0.1 P=0.1, L=12 exact", production: false },
    Preset { name: "boundary-cluster", description: "near the transition, M=0.5 P=1, L=16 MPS chi=32", production: false },
    Preset { name: "noninteracting-cluster", description: "as boundary-cluster with Delta=0", production: false },
    Preset { name: "antiferro-cluster", description: "as boundary-cluster with Delta=1.5", production: false },
    Preset { name: "ferro-cluster", description: "as boundary-cluster with Delta=-1.5", production: false },
    Preset { name: "sweep-small", description: "(P, M) grid at L=8 and L=12, exact backend", production: false },
    Preset { name: "production-phase-diagram", description: "(P, M) grid at L=50, chi=128 (days on one core)", production: true },
    Preset { name: "production-entropy-slope", description: "P=1 M=0.2 at L=50, chi=128, for the growth-rate fit", production: true },
    Preset { name: "production-cluster-scaling", description: "M=0.5 P=1 cluster length for L=16..50, chi=64", production: true },
];

fn base(l: usize, strength: f64, probability: f64) -> RunConfig {
    RunConfig {
        model: ModelSection { l, delta: -0.5, hopping: 1.0, filling: None },
        measurement: MeasurementSection {
            strength,
            probability,
            interval: 1.0,
            t_off: 50.0,
            t_end: 60.0,
            sign_policy: SignPolicy::FixedAtIntervalStart,
        },
        evolution: EvolutionSection::default(),
        ground_state: GroundStateSection::default(),
        ensemble: EnsembleSection::default(),
        sweep: SweepSection::default(),
        output: OutputSection::default(),
    }
}

fn exact(mut c: RunConfig) -> RunConfig {
    c.evolution.backend = BackendChoice::Oracle;
    c
}

/// L=16 MPS cells at the largest admissible step up to 0.05.
fn cluster(delta: f64) -> RunConfig {
    let mut c = base(16, 0.5, 1.0);
    c.model.delta = delta;
    c.evolution.chi_max = 32;
    c.evolution.dt = 0.05;
    c.evolution.clamp_dt = true;
    c.evolution.weight_floor = 1e-10;
    c
}

pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = match name {
        "zeno" => exact(base(12, 10.0, 1.0)),
        "rare-strong" => exact(base(12, 10.0, 0.1)),
        "weak-frequent" => exact(base(12, 0.1, 1.0)),
        "weak-rare" => exact(base(12, 0.1, 0.1)),
        "boundary-cluster" => cluster(-0.5),
        "noninteracting-cluster" => cluster(0.0),
        "antiferro-cluster" => cluster(1.5),
        "ferro-cluster" => cluster(-1.5),
        "sweep-small" => {
            let mut c = exact(base(12, 1.0, 1.0));
            c.sweep.probabilities = vec![0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
            c.sweep.strengths = vec![0.1, 0.2, 0.3, 0.5, 1.0, 3.0, 10.0];
            c.sweep.sizes = vec![8, 12];
            c.output.trajectories = false;
            c
        }
        "production-phase-diagram" => {
            let mut c = base(50, 1.0, 1.0);
            c.evolution.chi_max = 128;
            c.sweep.probabilities = vec![0.1, 0.2, 0.3, 0.5, 0.8, 1.0];
            c.sweep.strengths = vec![0.1, 0.2, 0.3, 0.5, 1.0, 3.0, 10.0];
            c.sweep.sizes = vec![16, 50];
            c
        }
        "production-entropy-slope" => {
            let mut c = base(50, 0.2, 1.0);
            c.evolution.chi_max = 128;
            c
        }
        "production-cluster-scaling" => {
            let mut c = base(50, 0.5, 1.0);
            c.evolution.chi_max = 64;
            c.sweep.sizes = vec![16, 24, 32, 40, 50];
            c
        }
        other => bail!("unknown preset {other:?}; known: {}", PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")),
    };
    c.output.dir = format!("artifacts/{name}").into();
    c.validate()?;
    Ok(c)
}
