//! The MPS backend and the exact statevector backend driven by the same
//! counter-based random numbers: densities, entropies and every measurement
//! sign coincide.
//!
//! cargo run --release -p monitored-core --example oracle_comparison [M] [P]

use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::exact::{dense_ground_state, dense_trajectory};
use monitored_core::model::{build_h0, MeasurementSpec, ModelSpec};
use monitored_core::protocol::run_trajectory;
use monitored_core::rng::RngPolicy;
use monitored_core::tdvp::EvolutionConfig;

fn main() -> monitored_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let m: f64 = args.next().map_or(0.1, |a| a.parse().expect("M"));
    let p: f64 = args.next().map_or(1.0, |a| a.parse().expect("P"));
    let model = ModelSpec::new(8, -0.5);
    let mut meas = MeasurementSpec::new(m, p);
    meas.t_off = 10.0;
    meas.t_end = 10.0;
    let evo = EvolutionConfig { dt: 0.005, chi_max: 16, weight_floor: 0.0, krylov_tol: 1e-12, ..EvolutionConfig::default() };
    let rng = RngPolicy::new(7, 3);

    let gs = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?.state;
    let mps = run_trajectory(&gs, &model, &meas, &evo, rng);
    let exact = dense_trajectory(&dense_ground_state(&model)?.vector, &model, &meas, evo.dt, rng);

    println!("   t   S_mps      S_exact    max|dn|   signs equal");
    for (a, b) in mps.intervals.iter().zip(&exact.intervals) {
        let dn = a.densities.iter().zip(&b.densities).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let same = a.events.iter().map(|e| e.sign).eq(b.events.iter().map(|e| e.sign));
        println!("{:>4}  {:.7}  {:.7}  {dn:.1e}   {same}", a.t, a.entropy_bits, b.entropy_bits);
    }
    Ok(())
}
