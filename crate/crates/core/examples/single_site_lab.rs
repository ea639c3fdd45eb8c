//! Single-site measurement algebra: Kraus pair, click statistics, and the
//! ensemble averages of both protocols against their deterministic equations.
//!
//! cargo run --release -p monitored-core --example single_site_lab

use monitored_core::single_site::*;
use monitored_core::C64;

fn main() -> monitored_core::Result<()> {
    let (m, t) = (0.05, 1.0);
    let ch = MeasurementChannel::from_strength(m, t)?;
    let (kp, km) = kraus_ops(&ch);
    println!("lambda = {:.5}, completeness error {:.1e}", ch.lambda, completeness_error(&ch));
    println!("K+ = diag({:.4}, {:.4}), K- = diag({:.4}, {:.4})", kp[(0, 0)], kp[(1, 1)], km[(0, 0)], km[(1, 1)]);

    let q = Qubit::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0))?;
    println!("click probability at |alpha|^2 = 0.5: {:.6}", ch.click_probability(&q));

    // conventional protocol: populations fixed, coherence decays at M^2 T / 2
    let steps = 100;
    let conv = monte_carlo_average(&q, m, t, steps, 10_000, SingleSiteProtocol::Conventional, 1)?;
    println!("\nconventional protocol vs Lindblad");
    println!("   t   a_mc     |b|_mc   |b|_lindblad");
    for j in (0..=steps).step_by(20) {
        let exact = lindblad_closed_form(q.density(), m, t, conv.times[j]);
        println!("{:>4}  {:.4}  {:.4}   {:.4}", conv.times[j], conv.mean[j].a, conv.mean[j].b.norm(), exact.b.norm());
    }

    // non-Hermitian protocol against the nonlinear master equation
    let q = Qubit::with_occupation(0.3)?;
    let nh = monte_carlo_average(&q, m, t, 4, 10_000, SingleSiteProtocol::Nonhermitian, 2)?;
    let dt = default_ode_dt(m, t);
    let ode = nonlinear_master_evolve(q.density(), m, t, 4.0, dt)?;
    println!("\nnon-Hermitian protocol vs nonlinear master equation");
    println!("   t   a_mc +- se        a_ode");
    for j in 0..=4 {
        let a = ode[(nh.times[j] / dt).round() as usize].1.a;
        println!("{:>4}  {:.5} +- {:.5}  {:.5}", nh.times[j], nh.mean[j].a, nh.stderr_a[j], a);
    }

    // a projective step reproduces the Born rule
    let strong = (0..1000)
        .filter(|&i| nonhermitian_step(&Qubit::with_occupation(0.7).unwrap(), 10.0, 1.0, (i as f64 + 0.5) / 1000.0).1 == 1)
        .count();
    println!("\nM T = 10, |alpha|^2 = 0.7: fraction ending occupied {:.3}", strong as f64 / 1000.0);
    Ok(())
}
