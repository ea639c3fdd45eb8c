//! Bond-dimension convergence on a small boundary cell: the same trajectory
//! keys at two chi, compared on S_window and C in combined standard errors.
//!
//! cargo run --release -p monitored-runner --example chi_benchmark

use anyhow::Result;

use monitored_runner::chi_bench::{chi_benchmark, write_report};
use monitored_runner::{default_workers, preset};

fn main() -> Result<()> {
    env_logger::init();
    let mut cfg = preset("boundary-cluster")?;
    cfg.model.l = 12;
    cfg.measurement.t_off = 20.0;
    cfg.measurement.t_end = 20.0;
    cfg.output.window = [10.0, 20.0];
    cfg.output.cluster_time = 20.0;
    cfg.ensemble.trajectories = 8;
    cfg.output.dir = "artifacts/example-chi".into();

    let rep = chi_benchmark(&cfg, &[8, 32], default_workers())?;
    for r in &rep.rows {
        println!(
            "chi={:>3}: S = {:.3} +- {:.3}, C = {:.2} +- {:.2}, max discarded weight {:.1e}",
            r.chi, r.window_average, r.window_stderr, r.mean_max_cluster, r.max_cluster_stderr, r.max_discarded_weight
        );
    }
    for c in &rep.comparisons {
        println!("chi {} vs {}: {:.2} / {:.2} sigma -> agree: {}", c.chi_a, c.chi_b, c.entropy_sigmas, c.cluster_sigmas, c.agree);
    }
    write_report(&cfg, &rep)?;
    Ok(())
}
