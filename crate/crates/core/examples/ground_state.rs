//! DMRG ground state of the open chain at half filling, checked against
//! exact diagonalization where that is still cheap.
//!
//! cargo run --release -p monitored-core --example ground_state [L] [Delta]

use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::exact::dense_ground_state;
use monitored_core::model::{build_h0, ModelSpec};

fn main() -> monitored_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(24, |a| a.parse().expect("L"));
    let delta: f64 = args.next().map_or(-0.5, |a| a.parse().expect("Delta"));
    let model = ModelSpec::new(l, delta);

    let res = dmrg(&build_h0(&model)?, &model, &DmrgOptions::default())?;
    let mut psi = res.state;
    println!("L={l} Delta={delta} N={}: E0 = {:.12} after {} half sweeps", model.particles(), res.energy, res.sweep_energies.len());
    println!("max bond dimension {}, max discarded weight {:.1e}", psi.max_bond_dim(), res.max_discarded_weight);

    let n = psi.local_densities()?;
    println!("densities: {}", n.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" "));
    print!("entropy profile (bits):");
    for cut in 1..l {
        print!(" {:.3}", psi.entanglement_entropy(cut)?);
    }
    println!();

    if l <= 14 {
        let ex = dense_ground_state(&model)?;
        println!("exact diagonalization: E0 = {:.12} (|diff| = {:.1e})", ex.energy, (ex.energy - res.energy).abs());
    }
    Ok(())
}
