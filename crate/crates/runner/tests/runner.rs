use std::fs;
use std::path::Path;

use monitored_core::protocol::TrajectoryRecord;
use monitored_core::single_site::SingleSiteProtocol;
use monitored_runner::artifacts::{read_manifest, Manifest, PhaseBoundaryFile, CellSummary};
use monitored_runner::chi_bench::chi_benchmark;
use monitored_runner::config::BackendChoice;
use monitored_runner::lab::{lab_rows, write_lab_csv, LabConfig};
use monitored_runner::presets::PRESETS;
use monitored_runner::{preset, resume, run, RunConfig};

const SMALL: &str = r#"
[model]
l = 8

[measurement]
strength = 1.0
probability = 1.0
t_off = 6.0
t_end = 6.0

[evolution]
backend = "exact"
dt = 0.01

[ensemble]
trajectories = 6
master_seed = 11

[sweep]
probabilities = [0.2, 1.0]
strengths = [0.1, 10.0]
sizes = [6, 8]

[output]
window = [3.0, 6.0]
cluster_time = 6.0
"#;

fn small(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(SMALL).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn config_defaults_and_round_trip() {
    let cfg = RunConfig::from_toml("[model]\nl = 12\n[measurement]\nstrength = 0.5\nprobability = 1.0\n").unwrap();
    assert_eq!(cfg.model.delta, -0.5);
    assert_eq!(cfg.evolution.dt, 0.005);
    assert_eq!(cfg.measurement.interval, 1.0);
    assert_eq!((cfg.measurement.t_off, cfg.measurement.t_end), (50.0, 60.0));
    assert_eq!(cfg.output.window, [40.0, 50.0]);
    assert_eq!(cfg.ensemble.trajectories, 40);
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn invalid_configs_are_rejected() {
    let base = "[model]\nl = 8\n[measurement]\nstrength = 10.0\nprobability = 1.0\n";
    // 0.1 * min(1/M, T) = 0.01 at M = 10
    assert!(RunConfig::from_toml(&format!("{base}[evolution]\ndt = 0.02\n")).is_err());
    assert!(RunConfig::from_toml(&format!("{base}[evolution]\ndt = 0.02\nclamp_dt = true\n")).is_ok());
    assert!(RunConfig::from_toml(&format!("{base}[evolution]\nbackend = \"exact\"\n[sweep]\nsizes = [16]\n")).is_err());
    assert!(RunConfig::from_toml(&format!("{base}[ensemble]\ntrajectories = 0\n")).is_err());
    assert!(RunConfig::from_toml(&format!("{base}[output]\nwindow = [50.0, 40.0]\n")).is_err());
    assert!(RunConfig::from_toml(&format!("{base}[model.extra]\n")).is_err());
    assert!(RunConfig::from_toml("[model]\nl = 7\n[measurement]\nstrength = 1.0\nprobability = 1.0\n").is_err());
    assert!(RunConfig::from_toml("[model]\nl = 8\n[measurement]\nstrength = 1.0\nprobability = 1.5\n").is_err());
}

#[test]
fn hash_ignores_output_section_only() {
    let a = small(Path::new("a"));
    let mut b = small(Path::new("b"));
    b.output.trajectories = false;
    assert_eq!(a.hash(), b.hash());
    b.ensemble.master_seed += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn every_preset_validates() {
    for p in PRESETS {
        let cfg = preset(p.name).unwrap();
        assert!(cfg.output.dir.ends_with(p.name));
    }
    assert!(preset("nope").is_err());
    let zeno = preset("zeno").unwrap();
    assert_eq!(zeno.evolution.backend, BackendChoice::Oracle);
    assert_eq!((zeno.model.l, zeno.measurement.strength, zeno.measurement.probability), (12, 10.0, 1.0));
    let sweep = preset("sweep-small").unwrap();
    assert_eq!(sweep.cells().len(), 2 * 6 * 7);
}

#[test]
fn worker_count_and_rerun_do_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let one = tmp.path().join("one");
    let many = tmp.path().join("many");
    let again = tmp.path().join("again");
    run(&small(&one), 1).unwrap();
    run(&small(&many), 8).unwrap();
    run(&small(&again), 3).unwrap();
    for name in ["summary.csv", "phase_boundary.json", "manifest.json", "cells/L8_D-0.5_P1_M0.1/entropy.csv"] {
        assert_eq!(read(&one, name), read(&many, name), "{name}");
        assert_eq!(read(&one, name), read(&again, name), "{name}");
    }
    let t = "cells/L6_D-0.5_P0.2_M10/trajectories/traj_0005.jsonl";
    assert_eq!(read(&one, t), read(&many, t));
}

#[test]
fn resume_runs_only_missing_cells_and_matches_clean_run() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = tmp.path().join("clean");
    let partial = tmp.path().join("partial");
    run(&small(&clean), 2).unwrap();

    // Simulate an interruption after the first three cells.
    let cfg = small(&partial);
    run(&cfg, 2).unwrap();
    let mut m: Manifest = serde_json::from_slice(&read(&partial, "manifest.json")).unwrap();
    let dropped = m.completed.split_off(3);
    for key in &dropped {
        fs::remove_dir_all(partial.join("cells").join(key)).unwrap();
    }
    fs::remove_file(partial.join("summary.csv")).unwrap();
    fs::write(partial.join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();

    let report = resume(&partial, 2).unwrap();
    assert_eq!(report.executed, dropped.len());
    assert_eq!(read(&clean, "summary.csv"), read(&partial, "summary.csv"));
    assert_eq!(read(&clean, "phase_boundary.json"), read(&partial, "phase_boundary.json"));

    // Complete directory: no-op.
    let report = resume(&partial, 2).unwrap();
    assert_eq!(report.executed, 0);
    assert_eq!(read(&clean, "summary.csv"), read(&partial, "summary.csv"));
}

#[test]
fn resume_refuses_corrupted_or_foreign_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut cfg = small(&dir);
    cfg.sweep.sizes = vec![6];
    cfg.sweep.strengths = vec![10.0];
    run(&cfg, 2).unwrap();

    let mut other = cfg.clone();
    other.ensemble.master_seed += 1;
    let err = run(&other, 2).unwrap_err();
    assert!(format!("{err:#}").contains("holds results for configuration"), "{err:#}");

    fs::write(dir.join("manifest.json"), "{ not json").unwrap();
    let err = resume(&dir, 2).unwrap_err();
    assert!(format!("{err:#}").contains("corrupted manifest"), "{err:#}");
    assert!(read_manifest(&dir).is_err());

    assert!(resume(&tmp.path().join("missing"), 1).is_err());
}

/// The figures consumer reads these files by column and key name.
#[test]
fn artifact_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let cfg = small(&dir);
    run(&cfg, 4).unwrap();
    let hash = cfg.hash();

    let mut summary = csv::Reader::from_path(dir.join("summary.csv")).unwrap();
    let header: Vec<String> = summary.headers().unwrap().iter().map(String::from).collect();
    for col in ["config_hash", "code_version", "L", "delta", "P", "M", "R", "n_failed", "degraded", "S_initial", "S_window", "S_window_stderr", "C", "C_stderr", "exceeds_initial", "grows_with_L"] {
        assert!(header.iter().any(|h| h == col), "summary.csv lacks {col}");
    }
    let rows: Vec<csv::StringRecord> = summary.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), cfg.cells().len());
    assert!(rows.iter().all(|r| &r[0] == hash.as_str()));

    let key = "L8_D-0.5_P1_M10";
    let mut entropy = csv::Reader::from_path(dir.join("cells").join(key).join("entropy.csv")).unwrap();
    assert_eq!(
        entropy.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "mean_entropy_bits", "entropy_stderr", "mean_max_cluster", "max_cluster_stderr"]
    );
    assert_eq!(entropy.records().count(), 7);

    let cell: CellSummary = serde_json::from_slice(&read(&dir, &format!("cells/{key}/summary.json"))).unwrap();
    assert_eq!((cell.config_hash.as_str(), cell.backend.as_str(), cell.summary.n_trajectories), (hash.as_str(), "exact", 6));

    let traj = fs::File::open(dir.join("cells").join(key).join("trajectories/traj_0000.jsonl")).unwrap();
    let rec = TrajectoryRecord::read_jsonl(std::io::BufReader::new(traj)).unwrap();
    assert_eq!((rec.header.l, rec.header.t_off, rec.intervals.len()), (8, 6.0, 7));
    assert!(rec.intervals.iter().all(|i| i.densities.len() == 8));

    let pb: PhaseBoundaryFile = serde_json::from_slice(&read(&dir, "phase_boundary.json")).unwrap();
    assert_eq!(pb.config_hash, hash);
    assert_eq!(pb.groups.len(), 2);
    let g = &pb.groups[0];
    assert_eq!((g.probabilities.len(), g.strengths.len(), g.values.len()), (2, 2, 2));
    let raw: serde_json::Value = serde_json::from_slice(&read(&dir, "phase_boundary.json")).unwrap();
    assert!(raw["groups"][0]["boundary"].is_array());
}

#[test]
fn trajectory_files_can_be_disabled() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("run"));
    cfg.output.trajectories = false;
    cfg.sweep.sizes = vec![6];
    run(&cfg, 2).unwrap();
    assert!(!tmp.path().join("run/cells/L6_D-0.5_P1_M10/trajectories").exists());
}

#[test]
fn chi_benchmark_with_repeated_chi_is_identical() {
    let mut cfg = small(Path::new("unused"));
    cfg.sweep = Default::default();
    cfg.model.l = 6;
    cfg.measurement.strength = 0.5;
    cfg.measurement.t_off = 3.0;
    cfg.measurement.t_end = 3.0;
    cfg.output.window = [1.0, 3.0];
    cfg.output.cluster_time = 3.0;
    cfg.evolution.dt = 0.05;
    cfg.ensemble.trajectories = 3;
    let rep = chi_benchmark(&cfg, &[8, 8], 2).unwrap();
    assert_eq!(rep.rows.len(), 2);
    assert_eq!(rep.rows[0], rep.rows[1]);
    assert!(rep.all_agree());
    assert_eq!(rep.comparisons[0].entropy_sigmas, 0.0);
    assert!(chi_benchmark(&cfg, &[8], 1).is_err());
}

#[test]
fn lab_csv_has_both_sources() {
    let cfg = LabConfig { trials: 200, steps: 3, protocol: SingleSiteProtocol::Conventional, ..LabConfig::default() };
    let rows = lab_rows(&cfg).unwrap();
    assert_eq!(rows.iter().filter(|r| r.source == "mc").count(), 4);
    assert_eq!(rows.iter().filter(|r| r.source == "ode").count(), 3 * 50 + 1);
    let mut buf = Vec::new();
    write_lab_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,a,re_b,im_b,source\n"));
    // Lindblad keeps the populations fixed.
    assert!(rows.iter().filter(|r| r.source == "ode").all(|r| (r.a - 0.3).abs() < 1e-12));
}

#[test]
fn readme_config_block_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let end = start + readme[start..].find("```").unwrap();
    let cfg = RunConfig::from_toml(&readme[start..end]).unwrap();
    assert_eq!(cfg.cells().len(), 6 * 7 * 2);
    assert_eq!(cfg, RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap());
}
