//! Two-site DMRG ground-state search.

use serde::{Deserialize, Serialize};

use crate::env::{self, Env};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, Mpo};
use crate::mps::{merge, svd_split, MpsState};
use crate::tensor::krylov::{lanczos_ground, LanczosOptions};
use crate::tensor::BlockTensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrgOptions {
    pub chi_max: usize,
    pub max_sweeps: usize,
    /// Convergence threshold on the energy change between full sweeps.
    pub e_tol: f64,
    pub weight_floor: f64,
    pub lanczos_dim: usize,
    pub lanczos_tol: f64,
}

impl Default for DmrgOptions {
    fn default() -> Self {
        Self { chi_max: 128, max_sweeps: 20, e_tol: 1e-10, weight_floor: 0.0, lanczos_dim: 30, lanczos_tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct DmrgResult {
    pub state: MpsState,
    pub energy: f64,
    /// Energy after every half sweep.
    pub sweep_energies: Vec<f64>,
    pub max_discarded_weight: f64,
    pub converged: bool,
}

/// Evenly spread product state with `n` particles on `l` sites
/// (the staggered state `1010...` at half filling).
pub fn spread_occupations(l: usize, n: usize) -> Vec<u8> {
    let mut occ: Vec<u8> = (0..l).map(|x| (((x + 1) * n) / l - (x * n) / l) as u8).collect();
    occ.reverse();
    occ
}

pub fn dmrg(h0: &Mpo, model: &ModelSpec, opts: &DmrgOptions) -> Result<DmrgResult> {
    model.validate()?;
    if h0.len() != model.l {
        return Err(Error::Shape("Hamiltonian and model lengths differ".into()));
    }
    if !h0.hermitian {
        return Err(Error::InvalidParameter("DMRG needs a Hermitian operator".into()));
    }
    if opts.max_sweeps == 0 || opts.max_sweeps > 20 {
        return Err(Error::InvalidParameter(format!("sweep count must lie in 1..=20, got {}", opts.max_sweeps)));
    }
    let l = model.l;
    let mut psi = MpsState::product_state(&spread_occupations(l, model.particles()))?;
    if l == 1 {
        return Err(Error::InvalidParameter("DMRG needs at least two sites".into()));
    }
    let lopts = LanczosOptions { max_dim: opts.lanczos_dim, tol: opts.lanczos_tol, max_restarts: 100 };
    let mut left: Vec<Option<Env>> = vec![None; l + 1];
    let mut right: Vec<Option<Env>> = vec![None; l + 1];
    left[0] = Some(env::left_boundary());
    right[l] = Some(env::right_boundary(psi.filling()));
    for k in (1..l).rev() {
        let r = env::right_update(right[k + 1].as_ref().unwrap(), psi.site(k), psi.site(k), &h0.sites[k]);
        right[k] = Some(r);
    }
    let mut sweep_energies = Vec::new();
    let mut max_disc: f64 = 0.0;
    let mut prev = f64::INFINITY;
    let mut converged = false;
    let mut energy = f64::INFINITY;
    for _ in 0..opts.max_sweeps {
        for k in 0..l - 1 {
            let (e, theta) = solve_pair(&psi, k, &left, &right, h0, lopts)?;
            energy = e;
            let split = svd_split(&theta, 1, opts.chi_max, opts.weight_floor)?;
            max_disc = max_disc.max(split.discarded_weight);
            let (a, c) = split.into_left_canonical();
            left[k + 1] = Some(env::left_update(left[k].as_ref().unwrap(), &a, &a, &h0.sites[k]));
            psi.set_site(k, a);
            psi.set_site(k + 1, c);
            psi.set_center(k + 1);
        }
        sweep_energies.push(energy);
        for k in (0..l - 1).rev() {
            let (e, theta) = solve_pair(&psi, k, &left, &right, h0, lopts)?;
            energy = e;
            let split = svd_split(&theta, 1, opts.chi_max, opts.weight_floor)?;
            max_disc = max_disc.max(split.discarded_weight);
            let (c, b) = split.into_right_canonical();
            right[k + 1] = Some(env::right_update(right[k + 2].as_ref().unwrap(), &b, &b, &h0.sites[k + 1]));
            psi.set_site(k, c);
            psi.set_site(k + 1, b);
            psi.set_center(k);
        }
        sweep_energies.push(energy);
        if (prev - energy).abs() < opts.e_tol {
            converged = true;
            break;
        }
        prev = energy;
    }
    psi.renormalize()?;
    Ok(DmrgResult { state: psi, energy, sweep_energies, max_discarded_weight: max_disc, converged })
}

fn solve_pair(
    psi: &MpsState,
    k: usize,
    left: &[Option<Env>],
    right: &[Option<Env>],
    h: &Mpo,
    lopts: LanczosOptions,
) -> Result<(f64, BlockTensor)> {
    let theta = merge(psi.site(k), psi.site(k + 1));
    let layout = theta.layout();
    let e = left[k].as_ref().unwrap();
    let f = right[k + 2].as_ref().unwrap();
    let (w1, w2) = (&h.sites[k], &h.sites[k + 1]);
    let v0 = theta.flatten(&layout);
    let res = lanczos_ground(
        |x, y| {
            let t = BlockTensor::unflatten(&layout, x);
            let out = env::apply_two_site(e, w1, w2, f, &t);
            y.copy_from_slice(&out.flatten(&layout));
        },
        &v0,
        lopts,
    )?;
    Ok((res.value, BlockTensor::unflatten(&layout, &res.vector)))
}
