//! Time-dependent variational principle for MPS, with per-bond switching
//! between two-site and one-site updates.

use serde::{Deserialize, Serialize};

use crate::env::{self, Env};
use crate::error::{Error, Result};
use crate::model::Mpo;
use crate::mps::{merge, svd_split, MpsState, Split};
use crate::tensor::krylov::{expm_apply, KrylovOptions};
use crate::tensor::BlockTensor;
use crate::C64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HybridPolicy {
    /// Two-site updates on bonds below `chi_max`, one-site updates on saturated bonds.
    #[default]
    TwoSiteUntilSaturated,
    AlwaysTwoSite,
    AlwaysOneSite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub chi_max: usize,
    /// Trailing Schmidt weight dropped in two-site truncations.
    pub weight_floor: f64,
    #[serde(default)]
    pub hybrid_policy: HybridPolicy,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            chi_max: 64,
            weight_floor: 1e-12,
            hybrid_policy: HybridPolicy::TwoSiteUntilSaturated,
            krylov_dim: 20,
            krylov_tol: 1e-10,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.chi_max == 0 || self.krylov_dim == 0 || !(self.weight_floor >= 0.0) {
            return Err(Error::InvalidParameter("dt, chi_max and krylov_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub max_discarded_weight: f64,
    pub max_bond_dim: usize,
    /// Norm before the final renormalization (1 for Hermitian evolution).
    pub norm: f64,
}

impl StepDiagnostics {
    pub fn merge(&mut self, other: &StepDiagnostics) {
        self.max_discarded_weight = self.max_discarded_weight.max(other.max_discarded_weight);
        self.max_bond_dim = self.max_bond_dim.max(other.max_bond_dim);
        self.norm = other.norm;
    }
}

/// Evolution engine holding the state, the generator and cached environments.
/// Between steps the orthogonality center sits on site 0.
pub struct TdvpEngine {
    psi: MpsState,
    h: Mpo,
    cfg: EvolutionConfig,
    left: Vec<Option<Env>>,
    right: Vec<Option<Env>>,
    /// Smallest kept relative Schmidt weight seen at each bond's last split.
    min_weight: Vec<f64>,
    /// Largest dimension each bond can reach in the fixed-charge sector.
    full_dim: Vec<usize>,
}

impl TdvpEngine {
    pub fn new(mut psi: MpsState, h: Mpo, cfg: EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        if h.len() != psi.len() {
            return Err(Error::Shape("generator and state lengths differ".into()));
        }
        if psi.len() < 2 {
            return Err(Error::InvalidParameter("TDVP needs at least two sites".into()));
        }
        psi.move_center_to(0)?;
        let l = psi.len();
        let n = psi.filling();
        let full_dim = (0..=l).map(|b| sector_dim(b, l, n)).collect();
        let mut e = Self {
            psi,
            h,
            cfg,
            left: vec![None; l + 1],
            right: vec![None; l + 1],
            min_weight: vec![f64::INFINITY; l + 1],
            full_dim,
        };
        e.rebuild_environments();
        Ok(e)
    }

    pub fn state(&self) -> &MpsState {
        &self.psi
    }

    pub fn into_state(self) -> MpsState {
        self.psi
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.cfg
    }

    pub fn hamiltonian(&self) -> &Mpo {
        &self.h
    }

    /// Replaces the generator (e.g. new measurement signs).
    pub fn set_hamiltonian(&mut self, h: Mpo) -> Result<()> {
        if h.len() != self.psi.len() {
            return Err(Error::Shape("generator and state lengths differ".into()));
        }
        self.h = h;
        self.rebuild_environments();
        Ok(())
    }

    fn rebuild_environments(&mut self) {
        let l = self.psi.len();
        self.left = vec![None; l + 1];
        self.right = vec![None; l + 1];
        self.left[0] = Some(env::left_boundary());
        self.right[l] = Some(env::right_boundary(self.psi.filling()));
        for k in (1..l).rev() {
            let r = env::right_update(self.right[k + 1].as_ref().unwrap(), self.psi.site(k), self.psi.site(k), &self.h.sites[k]);
            self.right[k] = Some(r);
        }
    }

    fn kopts(&self) -> KrylovOptions {
        KrylovOptions { krylov_dim: self.cfg.krylov_dim, tol: self.cfg.krylov_tol }
    }

    fn two_site_bond(&self, b: usize) -> bool {
        match self.cfg.hybrid_policy {
            HybridPolicy::AlwaysTwoSite => true,
            HybridPolicy::AlwaysOneSite => false,
            HybridPolicy::TwoSiteUntilSaturated => {
                let dim = self.psi.bond_sectors(b).total_dim();
                let cap = self.cfg.chi_max.min(self.full_dim[b]);
                !(dim >= cap && self.min_weight[b] >= self.cfg.weight_floor)
            }
        }
    }

    /// Windows `(first site, number of sites)` covering the chain for one step.
    pub fn windows(&self) -> Vec<(usize, usize)> {
        let l = self.psi.len();
        let mut out = Vec::new();
        let mut i = 0;
        while i < l {
            if i + 1 < l && self.two_site_bond(i + 1) {
                out.push((i, 2));
                if i + 2 >= l {
                    break;
                }
                i += if self.two_site_bond(i + 2) { 1 } else { 2 };
            } else {
                out.push((i, 1));
                i += 1;
            }
        }
        out
    }

    fn record_split(&mut self, bond: usize, split: &Split, diag: &mut StepDiagnostics) {
        let spec = split.spectrum();
        let tot: f64 = spec.iter().map(|x| x * x).sum();
        if let Some(last) = spec.last() {
            if tot > 0.0 {
                self.min_weight[bond] = last * last / tot;
            }
        }
        diag.max_discarded_weight = diag.max_discarded_weight.max(split.discarded_weight);
    }

    fn evolve_one_site(&self, k: usize, t: &BlockTensor, dt: f64) -> Result<BlockTensor> {
        let e = self.left[k].as_ref().unwrap();
        let f = self.right[k + 1].as_ref().unwrap();
        let w = &self.h.sites[k];
        evolve_tensor(t, dt, self.kopts(), |x| env::apply_one_site(e, w, f, x))
    }

    fn evolve_two_site(&self, k: usize, t: &BlockTensor, dt: f64) -> Result<BlockTensor> {
        let e = self.left[k].as_ref().unwrap();
        let f = self.right[k + 2].as_ref().unwrap();
        let (w1, w2) = (&self.h.sites[k], &self.h.sites[k + 1]);
        evolve_tensor(t, dt, self.kopts(), |x| env::apply_two_site(e, w1, w2, f, x))
    }

    fn evolve_bond(&self, b: usize, t: &BlockTensor, dt: f64) -> Result<BlockTensor> {
        let e = self.left[b].as_ref().unwrap();
        let f = self.right[b].as_ref().unwrap();
        evolve_tensor(t, dt, self.kopts(), |x| env::apply_zero_site(e, f, x))
    }

    /// One symmetric (second-order) step of length `dt`, followed by
    /// renormalization when the generator is not Hermitian.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let l = self.psi.len();
        let tau = 0.5 * self.cfg.dt;
        let chi = self.cfg.chi_max;
        let floor = self.cfg.weight_floor;
        let wins = self.windows();
        let mut diag = StepDiagnostics::default();
        debug_assert_eq!(self.psi.center(), 0);

        for (wi, &(s, n)) in wins.iter().enumerate() {
            let next = wins.get(wi + 1).copied();
            if n == 1 {
                let a = self.evolve_one_site(s, self.psi.site(s), tau)?;
                match next {
                    None => self.psi.set_site(s, a),
                    Some(_) => {
                        let split = svd_split(&a, 1, usize::MAX, 0.0)?;
                        self.record_split(s + 1, &split, &mut diag);
                        let (u, c) = split.into_left_canonical();
                        self.left[s + 1] = Some(env::left_update(self.left[s].as_ref().unwrap(), &u, &u, &self.h.sites[s]));
                        self.psi.set_site(s, u);
                        let c = self.evolve_bond(s + 1, &c, -tau)?;
                        let merged = merge(&c, self.psi.site(s + 1));
                        self.psi.set_site(s + 1, merged);
                        self.psi.set_center(s + 1);
                    }
                }
            } else {
                let theta = merge(self.psi.site(s), self.psi.site(s + 1));
                let theta = self.evolve_two_site(s, &theta, tau)?;
                let split = svd_split(&theta, 1, chi, floor)?;
                self.record_split(s + 1, &split, &mut diag);
                let (u, c) = split.into_left_canonical();
                self.left[s + 1] = Some(env::left_update(self.left[s].as_ref().unwrap(), &u, &u, &self.h.sites[s]));
                self.psi.set_site(s, u);
                self.psi.set_site(s + 1, c);
                self.psi.set_center(s + 1);
                match next {
                    None => {}
                    Some((ns, _)) if ns == s + 1 => {
                        let b = self.evolve_one_site(s + 1, self.psi.site(s + 1), -tau)?;
                        self.psi.set_site(s + 1, b);
                    }
                    Some(_) => {
                        let split = svd_split(self.psi.site(s + 1), 1, usize::MAX, 0.0)?;
                        self.record_split(s + 2, &split, &mut diag);
                        let (u, c) = split.into_left_canonical();
                        self.left[s + 2] =
                            Some(env::left_update(self.left[s + 1].as_ref().unwrap(), &u, &u, &self.h.sites[s + 1]));
                        self.psi.set_site(s + 1, u);
                        let c = self.evolve_bond(s + 2, &c, -tau)?;
                        let merged = merge(&c, self.psi.site(s + 2));
                        self.psi.set_site(s + 2, merged);
                        self.psi.set_center(s + 2);
                    }
                }
            }
        }
        debug_assert_eq!(self.psi.center(), l - 1);

        for wi in (0..wins.len()).rev() {
            let (s, n) = wins[wi];
            let prev = if wi > 0 { Some(wins[wi - 1]) } else { None };
            if n == 1 {
                let a = self.evolve_one_site(s, self.psi.site(s), tau)?;
                match prev {
                    None => self.psi.set_site(s, a),
                    Some(_) => {
                        let split = svd_split(&a, 0, usize::MAX, 0.0)?;
                        self.record_split(s, &split, &mut diag);
                        let (c, v) = split.into_right_canonical();
                        self.right[s] = Some(env::right_update(self.right[s + 1].as_ref().unwrap(), &v, &v, &self.h.sites[s]));
                        self.psi.set_site(s, v);
                        let c = self.evolve_bond(s, &c, -tau)?;
                        let merged = merge(self.psi.site(s - 1), &c);
                        self.psi.set_site(s - 1, merged);
                        self.psi.set_center(s - 1);
                    }
                }
            } else {
                let theta = merge(self.psi.site(s), self.psi.site(s + 1));
                let theta = self.evolve_two_site(s, &theta, tau)?;
                let split = svd_split(&theta, 1, chi, floor)?;
                self.record_split(s + 1, &split, &mut diag);
                let (c, v) = split.into_right_canonical();
                self.right[s + 1] = Some(env::right_update(self.right[s + 2].as_ref().unwrap(), &v, &v, &self.h.sites[s + 1]));
                self.psi.set_site(s, c);
                self.psi.set_site(s + 1, v);
                self.psi.set_center(s);
                match prev {
                    None => {}
                    Some((ps, 2)) if ps + 1 == s => {
                        let b = self.evolve_one_site(s, self.psi.site(s), -tau)?;
                        self.psi.set_site(s, b);
                    }
                    Some(_) => {
                        let split = svd_split(self.psi.site(s), 0, usize::MAX, 0.0)?;
                        self.record_split(s, &split, &mut diag);
                        let (c, v) = split.into_right_canonical();
                        self.right[s] = Some(env::right_update(self.right[s + 1].as_ref().unwrap(), &v, &v, &self.h.sites[s]));
                        self.psi.set_site(s, v);
                        let c = self.evolve_bond(s, &c, -tau)?;
                        let merged = merge(self.psi.site(s - 1), &c);
                        self.psi.set_site(s - 1, merged);
                        self.psi.set_center(s - 1);
                    }
                }
            }
        }
        debug_assert_eq!(self.psi.center(), 0);

        diag.norm = self.psi.norm();
        if !self.h.hermitian {
            self.psi.renormalize()?;
        }
        diag.max_bond_dim = self.psi.max_bond_dim();
        Ok(diag)
    }

    /// Repeated steps covering `duration` (must be a multiple of `dt`).
    pub fn evolve(&mut self, duration: f64) -> Result<StepDiagnostics> {
        let n = duration / self.cfg.dt;
        let steps = n.round();
        if (n - steps).abs() > 1e-9 || steps < 0.0 {
            return Err(Error::InvalidParameter(format!("duration {duration} is not a multiple of dt {}", self.cfg.dt)));
        }
        let mut diag = StepDiagnostics { norm: 1.0, max_bond_dim: self.psi.max_bond_dim(), ..Default::default() };
        for _ in 0..steps as usize {
            let d = self.step()?;
            diag.merge(&d);
        }
        Ok(diag)
    }
}

/// Single step of `state` under `h` without keeping the engine around.
pub fn tdvp_step(state: MpsState, h: &Mpo, cfg: &EvolutionConfig) -> Result<(MpsState, StepDiagnostics)> {
    let mut e = TdvpEngine::new(state, h.clone(), cfg.clone())?;
    let d = e.step()?;
    Ok((e.into_state(), d))
}

/// Evolves over `[0, t_span]` and returns snapshots every `snapshot_stride`
/// (including `t = 0`).
pub fn evolve_interval(
    state: MpsState,
    h: &Mpo,
    cfg: &EvolutionConfig,
    t_span: f64,
    snapshot_stride: f64,
) -> Result<(Vec<(f64, MpsState)>, StepDiagnostics)> {
    let mut e = TdvpEngine::new(state, h.clone(), cfg.clone())?;
    let mut snaps = vec![(0.0, e.state().clone())];
    let nsnap = (t_span / snapshot_stride + 1e-9).floor() as usize;
    let mut diag = StepDiagnostics { norm: 1.0, ..Default::default() };
    for i in 1..=nsnap {
        let d = e.evolve(snapshot_stride)?;
        diag.merge(&d);
        snaps.push((i as f64 * snapshot_stride, e.state().clone()));
    }
    Ok((snaps, diag))
}

fn evolve_tensor<F>(t: &BlockTensor, dt: f64, opts: KrylovOptions, apply: F) -> Result<BlockTensor>
where
    F: Fn(&BlockTensor) -> BlockTensor,
{
    let layout = t.layout();
    let v = t.flatten(&layout);
    let out = expm_apply(
        |x, y| {
            let xt = BlockTensor::unflatten(&layout, x);
            y.copy_from_slice(&apply(&xt).flatten(&layout));
        },
        &v,
        C64::new(dt, 0.0),
        opts,
    )?;
    Ok(BlockTensor::unflatten(&layout, &out))
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r.min(usize::MAX as u128) as usize
}

/// Dimension of bond `b` in the full Hilbert space with `n` particles on `l` sites.
fn sector_dim(b: usize, l: usize, n: usize) -> usize {
    (0..=n.min(b)).map(|q| binomial(b, q).min(binomial(l - b, n - q))).fold(0usize, |a, x| a.saturating_add(x))
}
