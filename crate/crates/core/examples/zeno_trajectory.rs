//! One trajectory in the strong, frequent measurement regime (M=10, P=1):
//! the density freezes into a particle/hole pattern and the entanglement
//! collapses. Prints a space-time map (`#` occupied, `.` empty, `+` in between).
//!
//! cargo run --release -p monitored-core --example zeno_trajectory [seed]

use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::model::{build_h0, MeasurementSpec, ModelSpec};
use monitored_core::observables::max_cluster;
use monitored_core::protocol::run_trajectory;
use monitored_core::rng::RngPolicy;
use monitored_core::tdvp::EvolutionConfig;

fn main() -> monitored_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(1, |a| a.parse().expect("seed"));
    let model = ModelSpec::new(16, -0.5);
    let mut meas = MeasurementSpec::new(10.0, 1.0);
    meas.t_off = 15.0;
    meas.t_end = 20.0;
    let evo = EvolutionConfig { dt: meas.max_dt(), chi_max: 32, weight_floor: 1e-10, ..EvolutionConfig::default() };

    let gs = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.state;
    let rec = run_trajectory(&gs, &model, &meas, &evo, RngPolicy::new(seed, 0));
    if let Some(f) = &rec.failure {
        eprintln!("trajectory failed at t={}: {}", f.t, f.error);
    }
    println!("   t  pattern           S(bits)  cluster");
    for r in &rec.intervals {
        let row: String = r.densities.iter().map(|&n| if n >= 0.8 { '#' } else if n <= 0.2 { '.' } else { '+' }).collect();
        let marker = if (r.t - meas.t_off).abs() < 1e-9 { "  <- measurement off" } else { "" };
        println!("{:>4}  {row}  {:>7.3}  {:>7}{marker}", r.t, r.entropy_bits, max_cluster(&r.densities, 0.2).max_length);
    }
    Ok(())
}
