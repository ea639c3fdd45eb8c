use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::exact::dense_ground_state;
use monitored_core::model::{build_h0, ModelSpec};

fn run(l: usize, delta: f64) -> (monitored_core::dmrg::DmrgResult, ModelSpec) {
    let model = ModelSpec::new(l, delta);
    let h = build_h0(&model).unwrap();
    (dmrg(&h, &model, &DmrgOptions::default()).unwrap(), model)
}

#[test]
fn two_sites_single_particle() {
    let (r, _) = run(2, 0.0);
    assert!((r.energy + 0.5).abs() < 1e-12);
}

#[test]
fn four_sites_free_fermion_energy() {
    let (r, _) = run(4, 0.0);
    let pi = std::f64::consts::PI;
    let exact = -((pi / 5.0).cos() + (2.0 * pi / 5.0).cos());
    assert!((r.energy - exact).abs() < 1e-10, "{} vs {exact}", r.energy);
    assert!((dense_ground_state(&ModelSpec::new(4, 0.0)).unwrap().energy - exact).abs() < 1e-10);
}

#[test]
fn matches_dense_ground_state() {
    for &(l, d) in &[(8usize, -0.5), (8, 1.5), (12, 0.0), (12, -0.5)] {
        let (mut r, model) = run(l, d);
        let ex = dense_ground_state(&model).unwrap();
        assert!((r.energy - ex.energy).abs() < 1e-8, "L={l} D={d}: {} vs {}", r.energy, ex.energy);
        let s_mps = r.state.entanglement_entropy(l / 2).unwrap();
        let s_ex = ex.basis.entanglement_entropy(&ex.vector, l / 2).unwrap();
        assert!((s_mps - s_ex).abs() < 1e-6, "L={l} D={d}: {s_mps} vs {s_ex}");
    }
}

#[test]
fn energy_decreases_over_sweeps() {
    let (r, _) = run(12, -0.5);
    for w in r.sweep_energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "{:?}", r.sweep_energies);
    }
    assert!(r.converged);
}

#[test]
fn variance_is_small() {
    let (r, model) = run(10, 0.5);
    let h = build_h0(&model).unwrap();
    let h2 = h.compose(&h).unwrap();
    let e = r.state.expectation(&h).unwrap().re;
    let e2 = r.state.expectation(&h2).unwrap().re;
    assert!((e - r.energy).abs() < 1e-9);
    assert!(e2 - e * e < 1e-6, "variance {}", e2 - e * e);
}

#[test]
fn densities_are_reflection_symmetric() {
    let (mut r, _) = run(10, 0.5);
    let n = r.state.local_densities().unwrap();
    for x in 0..10 {
        assert!((n[x] - n[9 - x]).abs() < 1e-8, "{n:?}");
    }
    assert!((n.iter().sum::<f64>() - 5.0).abs() < 1e-10);
}

#[test]
fn degenerate_ferromagnet_is_deterministic() {
    let (a, _) = run(8, -1.5);
    let (b, _) = run(8, -1.5);
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.state.to_dense().unwrap(), b.state.to_dense().unwrap());
}
