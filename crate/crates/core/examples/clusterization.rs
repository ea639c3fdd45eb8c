//! Cluster formation near the transition (M=0.5, P=1, L=16): longest run of
//! consecutive occupied (n >= 0.8) or empty (n <= 0.2) sites over time,
//! averaged over a few trajectories.
//!
//! cargo run --release -p monitored-core --example clusterization [trajectories]

use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::model::{build_h0, MeasurementSpec, ModelSpec};
use monitored_core::observables::{ensemble_average, SummaryOptions};
use monitored_core::protocol::run_trajectory;
use monitored_core::rng::RngPolicy;
use monitored_core::tdvp::EvolutionConfig;

fn main() -> monitored_core::Result<()> {
    let r: u64 = std::env::args().nth(1).map_or(4, |a| a.parse().expect("trajectories"));
    let model = ModelSpec::new(16, -0.5);
    let mut meas = MeasurementSpec::new(0.5, 1.0);
    meas.t_off = 20.0;
    meas.t_end = 20.0;
    let evo = EvolutionConfig { dt: 0.05, chi_max: 32, weight_floor: 1e-10, ..EvolutionConfig::default() };

    let gs = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.state;
    let records: Vec<_> = (0..r).map(|id| run_trajectory(&gs, &model, &meas, &evo, RngPolicy::new(5, id))).collect();
    let opts = SummaryOptions { window: (10.0, 20.0), cluster_time: 20.0, ..SummaryOptions::default() };
    let s = ensemble_average(&records, &opts)?;

    println!("   t   C +- se        S(bits)");
    for i in (0..s.times.len()).step_by(2) {
        println!("{:>4}  {:.2} +- {:.2}   {:.3}", s.times[i], s.mean_max_cluster_series[i], s.max_cluster_stderr_series[i], s.mean_entropy_bits[i]);
    }
    println!("C(t=20) = {:.2} +- {:.2} over {} trajectories", s.mean_max_cluster, s.max_cluster_stderr, s.n_trajectories);
    Ok(())
}
