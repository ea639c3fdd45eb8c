use monitored_core::exact::SectorBasis;
use monitored_core::model::{build_h0, ModelSpec};
use monitored_core::mps::MpsState;
use monitored_core::tensor::linalg::{vdot, vec_norm};
use monitored_core::{Error, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn random_sector_vector(l: usize, n: usize, seed: u64) -> Vec<C64> {
    let basis = SectorBasis::new(l, n).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..basis.len()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let nv = vec_norm(&v);
    basis.to_full(&v.iter().map(|z| z / nv).collect::<Vec<_>>())
}

#[test]
fn product_state_dense_ordering() {
    let mps = MpsState::product_state(&[1, 0]).unwrap();
    let v = mps.to_dense().unwrap();
    let expect = [0.0, 0.0, 1.0, 0.0];
    for (a, b) in v.iter().zip(expect) {
        assert!((a - C64::new(b, 0.0)).norm() < 1e-15);
    }
    assert_eq!(mps.filling(), 1);
}

#[test]
fn dense_roundtrip_is_exact_without_truncation() {
    let v = random_sector_vector(6, 3, 1);
    let (mps, disc) = MpsState::from_dense(&v, 64).unwrap();
    assert!(disc < 1e-20);
    let back = mps.to_dense().unwrap();
    let fid = vdot(&v, &back).norm_sqr();
    assert!(fid > 1.0 - 1e-10, "fidelity {fid}");
    let err = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    assert!(mps.isometry_error() < 1e-10);
}

#[test]
fn truncated_conversion_reports_discarded_weight() {
    let v = random_sector_vector(6, 3, 2);
    let (mps, disc) = MpsState::from_dense(&v, 2).unwrap();
    assert!(disc > 0.0);
    assert!(mps.max_bond_dim() <= 2);
    assert!((mps.norm() - 1.0).abs() < 1e-12);
}

#[test]
fn mixed_sectors_rejected() {
    let mut v = vec![C64::new(0.0, 0.0); 16];
    v[3] = C64::new(1.0, 0.0);
    v[1] = C64::new(1.0, 0.0);
    assert!(matches!(MpsState::from_dense(&v, 8), Err(Error::InvalidParameter(_))));
}

#[test]
fn observables_match_exact_basis() {
    let l = 8;
    let v = random_sector_vector(l, 4, 3);
    let basis = SectorBasis::new(l, 4).unwrap();
    let psi = basis.from_full(&v);
    let (mut mps, _) = MpsState::from_dense(&v, 64).unwrap();
    let dens = mps.local_densities().unwrap();
    for (a, b) in dens.iter().zip(basis.densities(&psi)) {
        assert!((a - b).abs() < 1e-12);
    }
    for cut in 1..l {
        let s_mps = mps.entanglement_entropy(cut).unwrap();
        let s_ex = basis.entanglement_entropy(&psi, cut).unwrap();
        assert!((s_mps - s_ex).abs() < 1e-10, "cut {cut}: {s_mps} vs {s_ex}");
    }
    assert!(mps.isometry_error() < 1e-10);
}

#[test]
fn expectation_matches_dense_operator() {
    let l = 6;
    let v = random_sector_vector(l, 3, 4);
    let (mps, _) = MpsState::from_dense(&v, 64).unwrap();
    let h = build_h0(&ModelSpec::new(l, 0.8)).unwrap();
    let hd = h.to_dense().unwrap();
    let hv = &hd * nalgebra::DMatrix::from_column_slice(v.len(), 1, &v);
    let exact = vdot(&v, hv.as_slice());
    let e = mps.expectation(&h).unwrap();
    assert!((e - exact).norm() < 1e-12);
}

#[test]
fn renormalize_rejects_zero_state() {
    let v = random_sector_vector(4, 2, 5);
    let (mut mps, _) = MpsState::from_dense(&v, 8).unwrap();
    let c = mps.center();
    let _ = c;
    let zero: Vec<C64> = vec![C64::new(0.0, 0.0); 16];
    assert!(MpsState::from_dense(&zero, 8).is_err());
    assert!((mps.renormalize().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn snapshot_roundtrip() {
    let v = random_sector_vector(8, 4, 6);
    let (mps, _) = MpsState::from_dense(&v, 64).unwrap();
    let mut buf = Vec::new();
    mps.write_snapshot(&mut buf).unwrap();
    let back = MpsState::read_snapshot(buf.as_slice()).unwrap();
    assert_eq!(back.bond_dims(), mps.bond_dims());
    let a = mps.to_dense().unwrap();
    let b = back.to_dense().unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x == y));
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(matches!(MpsState::read_snapshot(bad.as_slice()), Err(Error::Format(_))));
    assert!(MpsState::read_snapshot(&buf[..buf.len() - 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn center_moves_keep_state_and_isometries(seed in 0u64..1000, target in 0usize..8) {
        let v = random_sector_vector(8, 4, seed);
        let (mut mps, _) = MpsState::from_dense(&v, 64).unwrap();
        mps.move_center_to(target).unwrap();
        prop_assert!(mps.isometry_error() < 1e-10);
        let back = mps.to_dense().unwrap();
        let err = v.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
    }

    #[test]
    fn entropy_bounded_by_bond_dimension(seed in 0u64..1000, cut in 1usize..6) {
        let v = random_sector_vector(6, 3, seed);
        let (mut mps, _) = MpsState::from_dense(&v, 3).unwrap();
        let s = mps.entanglement_entropy(cut).unwrap();
        prop_assert!(s >= -1e-12 && s <= (3f64).log2() + 1e-9);
    }
}
