//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance -- 4 7` runs a subset. A failing
//! criterion is reported but only fails the process when
//! `ACCEPTANCE_STRICT=1`; errors (as opposed to failed checks) always do.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Context, Result};

use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::exact::{dense_ground_state, dense_trajectory};
use monitored_core::model::{build_h0, MeasurementSpec, ModelSpec};
use monitored_core::observables::{linear_fit, pattern_agreement};
use monitored_core::protocol::{run_trajectory, TrajectoryRecord};
use monitored_core::rng::{Purpose, RngPolicy};
use monitored_core::single_site::*;
use monitored_core::tdvp::{EvolutionConfig, HybridPolicy};
use monitored_core::C64;
use monitored_runner::artifacts::CellSummary;
use monitored_runner::chi_bench::chi_benchmark;
use monitored_runner::config::BackendChoice;
use monitored_runner::{default_workers, preset, run, RunConfig, RunReport};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

type Criterion = fn(&Path) -> Result<Outcome>;

/// Acceptance runs stop at t_off: no criterion looks past the measured window.
fn trimmed(mut cfg: RunConfig, dir: &Path, name: &str) -> RunConfig {
    cfg.measurement.t_end = cfg.measurement.t_off;
    cfg.ensemble.trajectories = 40;
    cfg.ensemble.master_seed = 2024;
    cfg.output.trajectories = false;
    cfg.output.dir = dir.join(name);
    cfg
}

fn cell(r: &RunReport, l: usize, p: f64, m: f64) -> &CellSummary {
    r.cells.iter().find(|c| c.cell.l == l && c.cell.probability == p && c.cell.strength == m).expect("cell in report")
}

fn max_deviation(a: &TrajectoryRecord, b: &TrajectoryRecord) -> (f64, f64) {
    let mut dn: f64 = 0.0;
    let mut ds: f64 = 0.0;
    for (x, y) in a.intervals.iter().zip(&b.intervals) {
        for (p, q) in x.densities.iter().zip(&y.densities) {
            dn = dn.max((p - q).abs());
        }
        ds = ds.max((x.entropy_bits - y.entropy_bits).abs());
    }
    (dn, ds)
}

fn oracle_equivalence(_: &Path) -> Result<Outcome> {
    let model = ModelSpec::new(8, -0.5);
    let gs = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.state;
    let ex = dense_ground_state(&model)?;
    let evo = EvolutionConfig {
        dt: 0.005,
        chi_max: 16,
        weight_floor: 0.0,
        hybrid_policy: HybridPolicy::TwoSiteUntilSaturated,
        krylov_dim: 20,
        krylov_tol: 1e-12,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, p) in [(10.0, 1.0), (0.1, 1.0), (10.0, 0.1)] {
        let mut meas = MeasurementSpec::new(m, p);
        meas.t_off = 10.0;
        meas.t_end = 10.0;
        let rng = RngPolicy::new(7, 3);
        let start = Instant::now();
        let a = run_trajectory(&gs, &model, &meas, &evo, rng);
        let elapsed = start.elapsed();
        let b = dense_trajectory(&ex.vector, &model, &meas, evo.dt, rng);
        ensure!(!a.failed() && !b.failed(), "trajectory failed: {:?} {:?}", a.failure, b.failure);
        ensure!(a.intervals.len() == b.intervals.len(), "record lengths differ");
        let (dn, ds) = max_deviation(&a, &b);
        pass &= dn < 1e-6 && ds < 1e-5 && elapsed < Duration::from_secs(120);
        parts.push(format!("(M={m},P={p}) dn={dn:.1e} dS={ds:.1e} {:.1}s", elapsed.as_secs_f64()));
    }
    outcome(pass, parts.join("; "))
}

fn dmrg_correctness(_: &Path) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for l in [8, 12] {
        for delta in [-0.5, 0.0, 1.5] {
            let model = ModelSpec::new(l, delta);
            let e = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.energy;
            worst = worst.max((e - dense_ground_state(&model)?.energy).abs());
        }
    }
    // hopping -(J/2) on 4 open sites: single-particle levels -cos(k pi / 5)
    let model = ModelSpec::new(4, 0.0);
    let e = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.energy;
    let analytic = -(PI / 5.0).cos() - (2.0 * PI / 5.0).cos();
    let free = (e - analytic).abs();
    outcome(worst < 1e-8 && free < 1e-10, format!("max |E_dmrg - E_dense| = {worst:.1e}; free-fermion L=4 error {free:.1e}"))
}

fn entropy_scaling(_: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let sizes = [16usize, 24, 32];
    let mut logs = Vec::new();
    let mut nats = Vec::new();
    for &l in &sizes {
        let model = ModelSpec::new(l, -0.5);
        let mut gs = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.state;
        logs.push((l as f64).ln());
        nats.push(gs.entanglement_entropy(l / 2)? * LN_2);
    }
    let fit = linear_fit(&logs, &nats)?;
    let c_eff = 6.0 * fit.slope;
    let elapsed = start.elapsed();
    outcome(
        (c_eff - 1.0).abs() <= 0.2 && elapsed < Duration::from_secs(600),
        format!("c_eff = {c_eff:.3} from S(L/2) = {nats:.4?} nats; {:.0}s", elapsed.as_secs_f64()),
    )
}

fn zeno_regime(dir: &Path) -> Result<Outcome> {
    let mut cfg = trimmed(preset("zeno")?, dir, "zeno");
    cfg.output.trajectories = true;
    let r = run(&cfg, default_workers())?;
    let s = &r.cells[0].summary;
    let tdir = r.dir.join("cells").join(r.cells[0].cell.key()).join("trajectories");
    let mut agreement = Vec::new();
    for id in 0..cfg.ensemble.trajectories {
        let f = fs::File::open(tdir.join(format!("traj_{id:04}.jsonl")))?;
        let rec = TrajectoryRecord::read_jsonl(std::io::BufReader::new(f))?;
        let (a, b) = (rec.at(10.0).context("t=10 row")?, rec.at(40.0).context("t=40 row")?);
        agreement.push(pattern_agreement(&a.densities, &b.densities));
    }
    let stability = agreement.iter().sum::<f64>() / agreement.len() as f64;
    outcome(
        s.window_average < 0.3 && stability >= 0.9,
        format!("S_window = {:.4} +- {:.4} bits; pattern agreement t=10 vs 40: {:.3}", s.window_average, s.window_stderr, stability),
    )
}

/// Runs (P, M) at L = 8 and 12 with the exact backend.
fn size_pair(dir: &Path, p: f64, m: f64) -> Result<RunReport> {
    let mut cfg = trimmed(preset("weak-frequent")?, dir, &format!("pair_P{p}_M{m}"));
    cfg.measurement.probability = p;
    cfg.measurement.strength = m;
    cfg.sweep.sizes = vec![8, 12];
    cfg.evolution.backend = BackendChoice::Exact;
    run(&cfg, default_workers())
}

fn entangling_regimes(dir: &Path) -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, p) in [(0.1, 1.0), (10.0, 0.1)] {
        let r = size_pair(dir, p, m)?;
        let big = cell(&r, 12, p, m);
        let pr = r.predicates[r.cells.iter().position(|c| std::ptr::eq(c, big)).unwrap()];
        let grow = pr.grows_with_l_sigma.unwrap();
        pass &= pr.exceeds_initial_sigma > 2.0 && grow > 2.0;
        parts.push(format!(
            "(M={m},P={p}) S12={:.3}+-{:.3} S0={:.3} S8={:.3}: exceeds {:.1}sigma, grows {:.1}sigma",
            big.summary.window_average,
            big.summary.window_stderr,
            big.summary.initial_entropy,
            cell(&r, 8, p, m).summary.window_average,
            pr.exceeds_initial_sigma,
            grow
        ));
    }
    outcome(pass, parts.join("; "))
}

fn phase_boundary_direction(dir: &Path) -> Result<Outcome> {
    let mut verdicts = Vec::new();
    for (p, m, want) in [(1.0, 0.3, true), (1.0, 1.0, false), (0.15, 10.0, true), (0.5, 10.0, false)] {
        let r = size_pair(dir, p, m)?;
        let i = r.cells.iter().position(|c| c.cell.l == 12).unwrap();
        let pr = r.predicates[i];
        verdicts.push((p, m, want, pr.exceeds_initial, pr.grows_with_l.unwrap(), r.cells[i].summary.window_average));
    }
    let pass = verdicts.iter().all(|&(_, _, want, a, b, _)| a == want && b == want);
    let detail = verdicts
        .iter()
        .map(|(p, m, want, a, b, s)| format!("(P={p},M={m}) want {} got exceeds={a} grows={b} S={s:.3}", if *want { "entangling" } else { "disentangling" }))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn clusterization(dir: &Path) -> Result<Outcome> {
    let base = trimmed(preset("boundary-cluster")?, dir, "clusters");
    let mut cfg = base.clone();
    cfg.sweep.strengths = vec![0.1, 0.5, 10.0];
    let r = run(&cfg, default_workers())?;
    let c = |m: f64| {
        let s = &cell(&r, 16, 1.0, m).summary;
        (s.mean_max_cluster, s.max_cluster_stderr)
    };
    let margin = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0) / (a.1 * a.1 + b.1 * b.1).sqrt();
    let (weak, mid, strong) = (c(0.1), c(0.5), c(10.0));
    let over_strong = margin(mid, strong);
    let over_weak = margin(mid, weak);

    let mut free = trimmed(preset("noninteracting-cluster")?, dir, "clusters_free");
    free.evolution = base.evolution.clone();
    let rf = run(&free, default_workers())?;
    let cfree = (rf.cells[0].summary.mean_max_cluster, rf.cells[0].summary.max_cluster_stderr);
    outcome(
        over_strong > 2.0 && over_weak > 2.0 && mid.0 >= cfree.0,
        format!(
            "C(M=0.5)={:.2}+-{:.2} C(M=10)={:.2}+-{:.2} ({over_strong:.1}sigma) C(M=0.1)={:.2}+-{:.2} ({over_weak:.1}sigma); Delta=0: {:.2}+-{:.2}",
            mid.0, mid.1, strong.0, strong.1, weak.0, weak.1, cfree.0, cfree.1
        ),
    )
}

fn single_site_suite(_: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    let completeness = (0..=100)
        .map(|i| completeness_error(&MeasurementChannel::new(PI * i as f64 / 100.0).unwrap()))
        .fold(0.0, f64::max);
    check(completeness < 1e-14, "Kraus completeness");

    for (a2, lambda) in [(0.3, 0.5), (0.7, 1.0)] {
        let q = Qubit::with_occupation(a2)?;
        let ch = MeasurementChannel::new(lambda)?;
        let p = a2 * lambda.sin().powi(2);
        let n = 10_000;
        let clicks =
            (0..n).filter(|&i| conventional_step(&q, &ch, RngPolicy::new(99, i).uniform(0, 0, Purpose::Threshold)).1 == 1).count();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        check((clicks as f64 / n as f64 - p).abs() < 3.0 * sigma, "click frequency");
    }

    let (m, t) = (0.05, 1.0);
    let q = Qubit::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0))?;
    let mc = monte_carlo_average(&q, m, t, 200, 10_000, SingleSiteProtocol::Conventional, 4)?;
    for j in (10..=200).step_by(10) {
        let exact = lindblad_closed_form(q.density(), m, t, mc.times[j]);
        check((mc.mean[j].a - exact.a).abs() < 3.0 * mc.stderr_a[j], "Lindblad a");
        check((mc.mean[j].b.norm() - exact.b.norm()).abs() < 3.0 * mc.stderr_b[j], "Lindblad |b|");
    }

    let q = Qubit::with_occupation(0.3)?;
    let mc = monte_carlo_average(&q, m, t, 4, 10_000, SingleSiteProtocol::Nonhermitian, 17)?;
    let dt = default_ode_dt(m, t);
    let ode = nonlinear_master_evolve(q.density(), m, t, 4.0, dt)?;
    for j in 1..=4 {
        let a = ode[(mc.times[j] / dt).round() as usize].1.a;
        check((mc.mean[j].a - a).abs() < 3.0 * mc.stderr_a[j], "nonlinear master vs Monte Carlo");
    }

    for a in [0.0, 0.5, 1.0] {
        let s0 = SingleSiteState::new(a, C64::new(0.0, 0.0))?;
        let traj = nonlinear_master_evolve(s0, 0.3, 0.2, 10.0, default_ode_dt(0.3, 0.2))?;
        check(traj.iter().all(|(_, s)| (s.a - a).abs() < 1e-10 && s.b.norm() < 1e-10), "dark state");
    }

    let mut composability: f64 = 0.0;
    let mut consistent = true;
    for a2 in [0.05, 0.3, 0.5, 0.77, 0.95] {
        for m in [0.1, 1.0, 5.0] {
            let q = Qubit::with_occupation(a2)?;
            for s in [1i8, -1] {
                let once = nonhermitian_evolve(&q, m, 0.6, s);
                let twice = nonhermitian_evolve(&nonhermitian_evolve(&q, m, 0.3, s), m, 0.3, s);
                composability = composability.max((once.alpha - twice.alpha).norm()).max((once.beta - twice.beta).norm());
            }
            for thr in [0.1, 0.4, 0.6, 0.9] {
                let (_, s) = nonhermitian_step(&q, m, 1.0, thr);
                for k in 0..=10 {
                    consistent &= (nonhermitian_evolve(&q, m, k as f64 / 10.0, s).occupation() > thr) == (a2 > thr);
                }
            }
        }
    }
    check(composability < 1e-14, "composability");
    check(consistent, "sign self-consistency");

    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), "runtime");
    let detail = format!("completeness {completeness:.1e}, composability {composability:.1e}, {:.1}s", elapsed.as_secs_f64());
    outcome(failures.is_empty(), if failures.is_empty() { detail } else { format!("{detail}; failed: {}", failures.join(", ")) })
}

fn chi_convergence(dir: &Path) -> Result<Outcome> {
    let cfg = trimmed(preset("boundary-cluster")?, dir, "chi");
    let rep = chi_benchmark(&cfg, &[16, 64], default_workers())?;
    let c = &rep.comparisons[0];
    let row = |chi| rep.rows.iter().find(|r| r.chi == chi).unwrap();
    let (a, b) = (row(16), row(64));
    outcome(
        c.agree,
        format!(
            "chi=16: S={:.3}+-{:.3} C={:.2}+-{:.2}; chi=64: S={:.3}+-{:.3} C={:.2}+-{:.2}; entropy {:.2}sigma, cluster {:.2}sigma",
            a.window_average,
            a.window_stderr,
            a.mean_max_cluster,
            a.max_cluster_stderr,
            b.window_average,
            b.window_stderr,
            b.mean_max_cluster,
            b.max_cluster_stderr,
            c.entropy_sigmas,
            c.cluster_sigmas
        ),
    )
}

fn determinism(dir: &Path) -> Result<Outcome> {
    // the sweep-small grid at L=8 over a shortened protocol
    let mut cfg = preset("sweep-small")?;
    cfg.sweep.sizes = vec![8];
    cfg.measurement.t_off = 10.0;
    cfg.measurement.t_end = 10.0;
    cfg.output.window = [5.0, 10.0];
    cfg.output.cluster_time = 10.0;
    cfg.ensemble.trajectories = 8;
    cfg.ensemble.master_seed = 99;
    let mut dirs = Vec::new();
    for (name, workers) in [("det_1", 1), ("det_8", 8), ("det_8_again", 8)] {
        cfg.output.dir = dir.join(name);
        run(&cfg, workers)?;
        dirs.push(cfg.output.dir.clone());
    }
    let mut files = vec!["summary.csv".to_string(), "phase_boundary.json".to_string()];
    files.extend(cfg.cells().iter().map(|c| format!("cells/{}/entropy.csv", c.key())));
    let mut mismatches = Vec::new();
    for f in &files {
        let reference = fs::read(dirs[0].join(f))?;
        for d in &dirs[1..] {
            if fs::read(d.join(f))? != reference {
                mismatches.push(format!("{}/{f}", d.file_name().unwrap().to_string_lossy()));
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{} cells, {} files compared across 1/8/8 workers; mismatches: {:?}", cfg.cells().len(), files.len(), mismatches),
    )
}

const CRITERIA: &[(&str, &str, Criterion)] = &[
    ("1", "oracle equivalence", oracle_equivalence),
    ("2", "DMRG correctness", dmrg_correctness),
    ("3", "ground-state entropy scaling", entropy_scaling),
    ("4", "Zeno regime", zeno_regime),
    ("5", "entangling regimes", entangling_regimes),
    ("6", "phase-boundary direction", phase_boundary_direction),
    ("7", "clusterization ordering", clusterization),
    ("8", "single-site suite", single_site_suite),
    ("9", "chi benchmark", chi_convergence),
    ("10", "determinism", determinism),
];

fn main() {
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut failed = 0;
    let mut errored = 0;
    for (id, name, f) in CRITERIA {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let res = f(tmp.path());
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(o) => {
                failed += !o.pass as usize;
                println!("{} [{id}] {name} ({secs:.0}s): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            }
            Err(e) => {
                errored += 1;
                println!("FAIL [{id}] {name} ({secs:.0}s): error: {e:#}");
            }
        }
    }
    println!("acceptance: {failed} failed, {errored} errored");
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
