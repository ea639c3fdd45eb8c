//! Stochastic measurement protocol: per-interval draws, sign rules and the
//! trajectory driver shared by the MPS and exact backends.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_interval_hamiltonian, MeasurementSpec, ModelSpec, SignPolicy};
use crate::mps::MpsState;
use crate::rng::{Purpose, RngPolicy};
use crate::tdvp::{EvolutionConfig, StepDiagnostics, TdvpEngine};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementEvent {
    pub j: usize,
    pub site: usize,
    /// 1 if the site is measured in this interval.
    pub p: u8,
    /// Born threshold, present for measured sites.
    pub m: Option<f64>,
    pub density_at_decision: f64,
    /// +1 or -1 for measured sites, 0 otherwise.
    pub sign: i8,
}

/// `+1` when `n > m`, `-1` otherwise (ties count as `-1`).
pub fn sign_of(n: f64, m: f64) -> i8 {
    if n > m {
        1
    } else {
        -1
    }
}

/// Draws the measured sites, thresholds and signs of interval `j`.
pub fn draw_interval_events(j: usize, densities: &[f64], meas: &MeasurementSpec, rng: &RngPolicy) -> Vec<MeasurementEvent> {
    densities
        .iter()
        .enumerate()
        .map(|(x, &n)| {
            let up = rng.uniform(j as u64, x as u64, Purpose::Measure);
            let p = (up < meas.probability) as u8;
            if p == 1 {
                let m = rng.uniform(j as u64, x as u64, Purpose::Threshold);
                MeasurementEvent { j, site: x, p, m: Some(m), density_at_decision: n, sign: sign_of(n, m) }
            } else {
                MeasurementEvent { j, site: x, p, m: None, density_at_decision: n, sign: 0 }
            }
        })
        .collect()
}

/// `(site, sign)` pairs of the measured sites.
pub fn active_signs(events: &[MeasurementEvent]) -> Vec<(usize, i8)> {
    events.iter().filter(|e| e.p == 1).map(|e| (e.site, e.sign)).collect()
}

/// Signs recomputed from current densities with the interval's thresholds.
pub fn instantaneous_signs(events: &[MeasurementEvent], densities: &[f64]) -> Vec<(usize, i8)> {
    events.iter().filter_map(|e| e.m.map(|m| (e.site, sign_of(densities[e.site], m)))).collect()
}

/// Observables at an interval boundary `t`, the events drawn there (which
/// act on the interval starting at `t`) and the truncation diagnostics of the
/// interval that ended at `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub t: f64,
    pub densities: Vec<f64>,
    pub entropy_bits: f64,
    pub events: Vec<MeasurementEvent>,
    pub discarded_weight_max: f64,
    pub chi_max_reached: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Mps,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub trajectory_id: u64,
    pub master_seed: u64,
    pub backend: BackendKind,
    pub sign_policy: SignPolicy,
    /// Set for protocol variants that differ from the default sign rule.
    pub variant: bool,
    pub l: usize,
    pub interval: f64,
    pub t_off: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub t: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub header: TrajectoryHeader,
    pub intervals: Vec<IntervalRecord>,
    pub failure: Option<FailureRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum JsonlLine {
    Header(TrajectoryHeader),
    Interval(IntervalRecord),
    Failure(FailureRecord),
}

impl TrajectoryRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn times(&self) -> Vec<f64> {
        self.intervals.iter().map(|r| r.t).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.intervals.iter().map(|r| r.entropy_bits).collect()
    }

    /// Row recorded at time `t` (within 1e-9).
    pub fn at(&self, t: f64) -> Option<&IntervalRecord> {
        self.intervals.iter().find(|r| (r.t - t).abs() < 1e-9)
    }

    /// One header line, one line per interval boundary and an optional failure line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let mut put = |line: &JsonlLine| -> Result<()> {
            serde_json::to_writer(&mut w, line).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n")?;
            Ok(())
        };
        put(&JsonlLine::Header(self.header.clone()))?;
        for r in &self.intervals {
            put(&JsonlLine::Interval(r.clone()))?;
        }
        if let Some(f) = &self.failure {
            put(&JsonlLine::Failure(f.clone()))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut header = None;
        let mut intervals = Vec::new();
        let mut failure = None;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line).map_err(|e| Error::Format(e.to_string()))? {
                JsonlLine::Header(h) => header = Some(h),
                JsonlLine::Interval(i) => intervals.push(i),
                JsonlLine::Failure(f) => failure = Some(f),
            }
        }
        let header = header.ok_or_else(|| Error::Format("trajectory file has no header line".into()))?;
        Ok(Self { header, intervals, failure })
    }
}

/// Operations the trajectory driver needs from a state representation.
pub trait Backend {
    fn kind(&self) -> BackendKind;
    /// Site densities and the half-chain entropy in bits.
    fn observe(&mut self) -> Result<(Vec<f64>, f64)>;
    fn densities(&mut self) -> Result<Vec<f64>>;
    /// Sets the measurement term `i M sum sign n` for the following steps.
    fn set_signs(&mut self, signs: &[(usize, i8)]) -> Result<()>;
    /// One time step followed by renormalization.
    fn step(&mut self) -> Result<StepDiagnostics>;
    fn dt(&self) -> f64;
}

/// Runs the full protocol: measured intervals up to `t_off`, then free
/// evolution up to `t_end`. Failures are recorded, not propagated.
pub fn drive<B: Backend>(backend: &mut B, meas: &MeasurementSpec, rng: RngPolicy, l: usize) -> TrajectoryRecord {
    let header = TrajectoryHeader {
        trajectory_id: rng.trajectory_id,
        master_seed: rng.master_seed,
        backend: backend.kind(),
        sign_policy: meas.sign_policy,
        variant: meas.sign_policy != SignPolicy::FixedAtIntervalStart,
        l,
        interval: meas.interval,
        t_off: meas.t_off,
    };
    let mut rec = TrajectoryRecord { header, intervals: Vec::new(), failure: None };
    let mut t_now = 0.0;
    if let Err(e) = drive_inner(backend, meas, rng, &mut rec, &mut t_now) {
        rec.failure = Some(FailureRecord { t: t_now, error: e.to_string() });
    }
    rec
}

fn drive_inner<B: Backend>(
    backend: &mut B,
    meas: &MeasurementSpec,
    rng: RngPolicy,
    rec: &mut TrajectoryRecord,
    t_now: &mut f64,
) -> Result<()> {
    meas.validate()?;
    meas.check_dt(backend.dt())?;
    let n_meas = meas.measured_intervals();
    let n_total = n_meas + meas.free_intervals();
    let steps = (meas.interval / backend.dt()).round() as usize;
    let mut acc = StepDiagnostics::default();
    let mut current: Option<Vec<(usize, i8)>> = None;
    for j in 0..=n_total {
        let t = j as f64 * meas.interval;
        *t_now = t;
        let (dens, ent) = backend.observe()?;
        let events = if j < n_meas { draw_interval_events(j, &dens, meas, &rng) } else { Vec::new() };
        rec.intervals.push(IntervalRecord {
            t,
            densities: dens,
            entropy_bits: ent,
            events: events.clone(),
            discarded_weight_max: acc.max_discarded_weight,
            chi_max_reached: acc.max_bond_dim,
        });
        if j == n_total {
            break;
        }
        acc = StepDiagnostics::default();
        let signs = active_signs(&events);
        if current.as_ref() != Some(&signs) {
            backend.set_signs(&signs)?;
            current = Some(signs);
        }
        let instantaneous = meas.sign_policy == SignPolicy::Instantaneous && j < n_meas;
        for s in 0..steps {
            if instantaneous && s > 0 {
                let d = backend.densities()?;
                let signs = instantaneous_signs(&events, &d);
                if current.as_ref() != Some(&signs) {
                    backend.set_signs(&signs)?;
                    current = Some(signs);
                }
            }
            *t_now = t + s as f64 * backend.dt();
            let d = backend.step()?;
            acc.merge(&d);
        }
    }
    Ok(())
}

/// MPS state evolved with TDVP under `H0 + H_meas`.
pub struct MpsBackend {
    engine: TdvpEngine,
    model: ModelSpec,
    meas: MeasurementSpec,
}

impl MpsBackend {
    pub fn new(initial: MpsState, model: &ModelSpec, meas: &MeasurementSpec, evo: &EvolutionConfig) -> Result<Self> {
        model.validate()?;
        if initial.len() != model.l || initial.filling() != model.particles() {
            return Err(Error::Shape("initial state does not match the model".into()));
        }
        let h = build_interval_hamiltonian(model, meas, &[])?;
        let engine = TdvpEngine::new(initial, h, evo.clone())?;
        Ok(Self { engine, model: model.clone(), meas: meas.clone() })
    }

    pub fn state(&self) -> &MpsState {
        self.engine.state()
    }
}

impl Backend for MpsBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Mps
    }

    fn observe(&mut self) -> Result<(Vec<f64>, f64)> {
        let mut s = self.engine.state().clone();
        let (dens, ent) = s.sweep_observables()?;
        Ok((dens, ent[self.model.l / 2 - 1]))
    }

    fn densities(&mut self) -> Result<Vec<f64>> {
        let mut s = self.engine.state().clone();
        s.local_densities()
    }

    fn set_signs(&mut self, signs: &[(usize, i8)]) -> Result<()> {
        let h = build_interval_hamiltonian(&self.model, &self.meas, signs)?;
        self.engine.set_hamiltonian(h)
    }

    fn step(&mut self) -> Result<StepDiagnostics> {
        self.engine.step()
    }

    fn dt(&self) -> f64 {
        self.engine.config().dt
    }
}

/// Full protocol on the MPS backend from `initial` (normally the ground state).
pub fn run_trajectory(
    initial: &MpsState,
    model: &ModelSpec,
    meas: &MeasurementSpec,
    evo: &EvolutionConfig,
    rng: RngPolicy,
) -> TrajectoryRecord {
    match MpsBackend::new(initial.clone(), model, meas, evo) {
        Ok(mut b) => drive(&mut b, meas, rng, model.l),
        Err(e) => failed_record(BackendKind::Mps, meas, rng, model.l, e),
    }
}

pub(crate) fn failed_record(kind: BackendKind, meas: &MeasurementSpec, rng: RngPolicy, l: usize, e: Error) -> TrajectoryRecord {
    TrajectoryRecord {
        header: TrajectoryHeader {
            trajectory_id: rng.trajectory_id,
            master_seed: rng.master_seed,
            backend: kind,
            sign_policy: meas.sign_policy,
            variant: meas.sign_policy != SignPolicy::FixedAtIntervalStart,
            l,
            interval: meas.interval,
            t_off: meas.t_off,
        },
        intervals: Vec::new(),
        failure: Some(FailureRecord { t: 0.0, error: e.to_string() }),
    }
}
