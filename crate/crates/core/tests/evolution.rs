use monitored_core::dmrg::{dmrg, DmrgOptions};
use monitored_core::exact::{dense_ground_state, SparseH0};
use monitored_core::model::{build_h0, build_interval_hamiltonian, MeasurementSpec, ModelSpec};
use monitored_core::mps::MpsState;
use monitored_core::tdvp::{EvolutionConfig, HybridPolicy, TdvpEngine};
use monitored_core::tensor::krylov::{expm_apply, KrylovOptions};
use monitored_core::tensor::linalg::{scale, vdot, vec_norm};
use monitored_core::C64;

fn ground_state(l: usize, delta: f64) -> (ModelSpec, MpsState) {
    let model = ModelSpec::new(l, delta);
    let h = build_h0(&model).unwrap();
    (model.clone(), dmrg(&h, &model, &DmrgOptions::default()).unwrap().state)
}

fn cfg(dt: f64, chi: usize, policy: HybridPolicy) -> EvolutionConfig {
    EvolutionConfig { dt, chi_max: chi, weight_floor: 0.0, hybrid_policy: policy, krylov_dim: 20, krylov_tol: 1e-12 }
}

/// Dense evolution of the full-space vector under a fixed dense generator, renormalized every step.
fn dense_evolve(model: &ModelSpec, events: &[(usize, i8)], m: f64, v0: &[C64], dt: f64, steps: usize) -> Vec<C64> {
    let basis = monitored_core::exact::SectorBasis::new(model.l, model.particles()).unwrap();
    let h0 = SparseH0::new(model, &basis).unwrap();
    let extra: Vec<C64> = basis
        .states()
        .iter()
        .map(|&s| {
            let v: f64 = events.iter().filter(|(x, _)| basis.occupied(s, *x)).map(|&(_, sg)| m * sg as f64).sum();
            C64::new(0.0, v)
        })
        .collect();
    let mut psi = basis.from_full(v0);
    for _ in 0..steps {
        psi = expm_apply(|x, y| h0.apply(Some(&extra), x, y), &psi, C64::new(dt, 0.0), KrylovOptions { krylov_dim: 30, tol: 1e-13 }).unwrap();
        let n = vec_norm(&psi);
        scale(&mut psi, C64::new(1.0 / n, 0.0));
    }
    basis.to_full(&psi)
}

#[test]
fn ground_state_is_stationary() {
    let (model, gs) = ground_state(10, -0.5);
    let mut s0 = gs.clone();
    let (n0, e0) = s0.sweep_observables().unwrap();
    let h = build_h0(&model).unwrap();
    let mut eng = TdvpEngine::new(gs, h, cfg(0.01, 64, HybridPolicy::TwoSiteUntilSaturated)).unwrap();
    for _ in 0..100 {
        eng.step().unwrap();
    }
    let mut s1 = eng.state().clone();
    let (n1, e1) = s1.sweep_observables().unwrap();
    for (a, b) in n0.iter().zip(&n1) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((e0[4] - e1[4]).abs() < 1e-6);
}

#[test]
fn hermitian_quench_conserves_energy() {
    let model = ModelSpec::new(10, 0.5);
    let h = build_h0(&model).unwrap();
    let psi = MpsState::product_state(&[1, 0, 1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
    let e0 = psi.expectation(&h).unwrap().re;
    let mut eng = TdvpEngine::new(psi, h.clone(), cfg(0.05, 64, HybridPolicy::TwoSiteUntilSaturated)).unwrap();
    eng.evolve(10.0).unwrap();
    let e1 = eng.state().expectation(&h).unwrap().re;
    assert!((e1 - e0).abs() < 1e-6, "{e0} -> {e1}");
    assert!((eng.state().norm() - 1.0).abs() < 1e-10);
}

#[test]
fn non_hermitian_evolution_matches_dense() {
    let (model, gs) = ground_state(8, -0.5);
    let meas = MeasurementSpec::new(2.0, 1.0);
    let events = [(0, 1), (2, -1), (3, 1), (6, -1)];
    let h = build_interval_hamiltonian(&model, &meas, &events).unwrap();
    let v0 = gs.to_dense().unwrap();
    for policy in [HybridPolicy::TwoSiteUntilSaturated, HybridPolicy::AlwaysTwoSite] {
        let mut eng = TdvpEngine::new(gs.clone(), h.clone(), cfg(0.01, 16, policy)).unwrap();
        eng.evolve(1.0).unwrap();
        let v = eng.state().to_dense().unwrap();
        let exact = dense_evolve(&model, &events, 2.0, &v0, 0.01, 100);
        let fid = vdot(&exact, &v).norm_sqr();
        assert!(1.0 - fid < 1e-8, "{policy:?}: infidelity {}", 1.0 - fid);
    }
}

#[test]
fn hybrid_matches_two_site_below_saturation() {
    let (model, gs) = ground_state(10, 0.0);
    let meas = MeasurementSpec::new(0.5, 1.0);
    let h = build_interval_hamiltonian(&model, &meas, &[(1, 1), (4, -1), (7, 1)]).unwrap();
    let mut a = TdvpEngine::new(gs.clone(), h.clone(), cfg(0.02, 64, HybridPolicy::TwoSiteUntilSaturated)).unwrap();
    let mut b = TdvpEngine::new(gs, h, cfg(0.02, 64, HybridPolicy::AlwaysTwoSite)).unwrap();
    a.evolve(1.0).unwrap();
    b.evolve(1.0).unwrap();
    let mut sa = a.state().clone();
    let mut sb = b.state().clone();
    let (na, ea) = sa.sweep_observables().unwrap();
    let (nb, eb) = sb.sweep_observables().unwrap();
    for (x, y) in na.iter().zip(&nb) {
        assert!((x - y).abs() < 1e-6);
    }
    assert!((ea[4] - eb[4]).abs() < 1e-6);
}

#[test]
fn halving_dt_changes_entropy_little() {
    let (model, gs) = ground_state(8, -0.5);
    let meas = MeasurementSpec::new(1.0, 1.0);
    let h = build_interval_hamiltonian(&model, &meas, &[(0, -1), (3, 1), (5, 1)]).unwrap();
    let mut ent = Vec::new();
    for dt in [0.02, 0.01] {
        let mut e = TdvpEngine::new(gs.clone(), h.clone(), cfg(dt, 16, HybridPolicy::TwoSiteUntilSaturated)).unwrap();
        e.evolve(2.0).unwrap();
        let mut s = e.state().clone();
        ent.push(s.entanglement_entropy(4).unwrap());
    }
    assert!((ent[0] - ent[1]).abs() < 1e-4, "{ent:?}");
}

#[test]
fn norm_growth_follows_measurement_term() {
    let (model, gs) = ground_state(8, 0.0);
    let m = 0.7;
    let meas = MeasurementSpec::new(m, 1.0);
    let events = [(1, 1), (2, -1), (5, 1)];
    let h = build_interval_hamiltonian(&model, &meas, &events).unwrap();
    let mut s = gs.clone();
    let n = s.local_densities().unwrap();
    let expected: f64 = 2.0 * events.iter().map(|&(x, sg)| m * sg as f64 * n[x]).sum::<f64>();
    let dt = 1e-3;
    let mut eng = TdvpEngine::new(gs, h, cfg(dt, 16, HybridPolicy::TwoSiteUntilSaturated)).unwrap();
    let d = eng.step().unwrap();
    let rate = (d.norm * d.norm - 1.0) / dt;
    assert!((rate - expected).abs() < 1e-2 * expected.abs().max(1.0), "{rate} vs {expected}");
}

#[test]
fn exact_ground_state_agrees_with_engine_start() {
    let (model, gs) = ground_state(8, 1.5);
    let ex = dense_ground_state(&model).unwrap();
    let v = ex.basis.from_full(&gs.to_dense().unwrap());
    assert!(vdot(&ex.vector, &v).norm() > 1.0 - 1e-8);
}
