//! Exact statevector backend in the fixed-filling sector.
//!
//! Basis states are bitstrings with the requested number of particles, in
//! ascending integer order, with site 0 as the most significant bit.

use crate::error::{Error, Result};
use crate::model::{MeasurementSpec, ModelSpec};
use crate::mps::entropy_bits;
use crate::protocol::{drive, failed_record, Backend, BackendKind, TrajectoryRecord};
use crate::rng::RngPolicy;
use crate::tdvp::StepDiagnostics;
use crate::tensor::krylov::{expm_apply, lanczos_ground, KrylovOptions, LanczosOptions};
use crate::tensor::linalg::{self, scale, vec_norm, Mat};
use crate::C64;

pub const MAX_EXACT_SITES: usize = 16;

#[derive(Clone, Debug)]
pub struct SectorBasis {
    l: usize,
    particles: usize,
    states: Vec<u64>,
}

impl SectorBasis {
    pub fn new(l: usize, particles: usize) -> Result<Self> {
        if l == 0 || l > MAX_EXACT_SITES {
            return Err(Error::InvalidParameter(format!("exact basis supports 1..={MAX_EXACT_SITES} sites, got {l}")));
        }
        if particles > l {
            return Err(Error::InvalidParameter("more particles than sites".into()));
        }
        let states = (0u64..(1u64 << l)).filter(|s| s.count_ones() as usize == particles).collect();
        Ok(Self { l, particles, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    pub fn occupied(&self, state: u64, site: usize) -> bool {
        (state >> (self.l - 1 - site)) & 1 == 1
    }

    /// Basis vector of a product state.
    pub fn product_state(&self, occupations: &[u8]) -> Result<Vec<C64>> {
        if occupations.len() != self.l {
            return Err(Error::Shape("occupation list has wrong length".into()));
        }
        let s = occupations.iter().fold(0u64, |acc, &o| (acc << 1) | (o as u64 & 1));
        let idx = self.index_of(s).ok_or_else(|| Error::InvalidParameter("product state outside sector".into()))?;
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        v[idx] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// Embeds a sector vector in the full `2^L` space.
    pub fn to_full(&self, psi: &[C64]) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); 1 << self.l];
        for (&s, &a) in self.states.iter().zip(psi) {
            v[s as usize] = a;
        }
        v
    }

    pub fn from_full(&self, v: &[C64]) -> Vec<C64> {
        self.states.iter().map(|&s| v[s as usize]).collect()
    }

    pub fn densities(&self, psi: &[C64]) -> Vec<f64> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mut n = vec![0.0; self.l];
        for (&s, a) in self.states.iter().zip(psi) {
            let w = a.norm_sqr();
            for (x, nx) in n.iter_mut().enumerate() {
                if self.occupied(s, x) {
                    *nx += w;
                }
            }
        }
        n.iter().map(|x| x / norm).collect()
    }

    /// Normalized Schmidt values across the bond after `cut` sites.
    pub fn schmidt_values(&self, psi: &[C64], cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.l {
            return Err(Error::InvalidParameter(format!("cut {cut} must lie in 1..{}", self.l)));
        }
        let rbits = self.l - cut;
        let mask = (1u64 << rbits) - 1;
        let mut all = Vec::new();
        for q in 0..=cut.min(self.particles) {
            let lefts: Vec<u64> = (0..(1u64 << cut)).filter(|x| x.count_ones() as usize == q).collect();
            let rights: Vec<u64> =
                (0..(1u64 << rbits)).filter(|x| x.count_ones() as usize + q == self.particles).collect();
            if lefts.is_empty() || rights.is_empty() {
                continue;
            }
            let mut m = Mat::zeros(lefts.len(), rights.len());
            for (&s, &a) in self.states.iter().zip(psi) {
                let (hl, hr) = (s >> rbits, s & mask);
                if hl.count_ones() as usize == q {
                    let i = lefts.binary_search(&hl).unwrap();
                    let j = rights.binary_search(&hr).unwrap();
                    m[(i, j)] = a;
                }
            }
            all.extend(linalg::svd(&m)?.s);
        }
        all.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(crate::mps::normalized_spectrum(&all))
    }

    pub fn entanglement_entropy(&self, psi: &[C64], cut: usize) -> Result<f64> {
        Ok(entropy_bits(&self.schmidt_values(psi, cut)?))
    }
}

/// Sparse `H0` in a sector basis: real diagonal plus hopping pairs.
#[derive(Clone, Debug)]
pub struct SparseH0 {
    pub diag: Vec<f64>,
    /// `(row, col, value)` off-diagonal entries.
    pub offdiag: Vec<(usize, usize, f64)>,
}

impl SparseH0 {
    pub fn new(model: &ModelSpec, basis: &SectorBasis) -> Result<Self> {
        model.validate()?;
        let l = model.l;
        if basis.sites() != l {
            return Err(Error::Shape("basis and model lengths differ".into()));
        }
        let mut diag = vec![0.0; basis.len()];
        let mut offdiag = Vec::new();
        for (i, &s) in basis.states().iter().enumerate() {
            for x in 0..l - 1 {
                let (a, b) = (basis.occupied(s, x), basis.occupied(s, x + 1));
                if a && b {
                    diag[i] += model.delta;
                }
                if a != b {
                    let flipped = s ^ (1u64 << (l - 1 - x)) ^ (1u64 << (l - 2 - x));
                    let j = basis.index_of(flipped).unwrap();
                    offdiag.push((j, i, -0.5 * model.hopping));
                }
            }
        }
        Ok(Self { diag, offdiag })
    }

    /// `y = H0 x + extra ∘ x`.
    pub fn apply(&self, extra: Option<&[C64]>, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = x[i] * self.diag[i];
        }
        if let Some(e) = extra {
            for ((yi, xi), ei) in y.iter_mut().zip(x).zip(e) {
                *yi += xi * ei;
            }
        }
        for &(r, c, v) in &self.offdiag {
            y[r] += x[c] * v;
        }
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.diag.len();
        let mut m = Mat::zeros(n, n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        for &(r, c, v) in &self.offdiag {
            m[(r, c)] += C64::new(v, 0.0);
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct DenseGroundState {
    pub energy: f64,
    pub vector: Vec<C64>,
    pub basis: SectorBasis,
    pub residual: f64,
}

/// Ground state of `H0` by Lanczos in the fixed-filling sector (`L <= 14`).
pub fn dense_ground_state(model: &ModelSpec) -> Result<DenseGroundState> {
    model.validate()?;
    if model.l > 14 {
        return Err(Error::InvalidParameter(format!("dense ground state limited to L <= 14, got {}", model.l)));
    }
    let basis = SectorBasis::new(model.l, model.particles())?;
    let h = SparseH0::new(model, &basis)?;
    // Deterministic start vector with weight on every basis state.
    let v0: Vec<C64> = (0..basis.len()).map(|i| C64::new(1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0, 0.0)).collect();
    let opts = LanczosOptions { max_dim: 60, tol: 1e-11, max_restarts: 500 };
    let eig = lanczos_ground(|x, y| h.apply(None, x, y), &v0, opts)?;
    Ok(DenseGroundState { energy: eig.value, vector: eig.vector, basis, residual: eig.residual })
}

/// Sector statevector evolved with Krylov exponentials under `H0 + H_meas`.
pub struct DenseBackend {
    basis: SectorBasis,
    h0: SparseH0,
    psi: Vec<C64>,
    extra: Vec<C64>,
    strength: f64,
    dt: f64,
    kopts: KrylovOptions,
    hermitian: bool,
}

impl DenseBackend {
    pub fn new(initial: &[C64], model: &ModelSpec, strength: f64, dt: f64, kopts: KrylovOptions) -> Result<Self> {
        let basis = SectorBasis::new(model.l, model.particles())?;
        if initial.len() != basis.len() {
            return Err(Error::Shape(format!("initial vector has {} entries, sector has {}", initial.len(), basis.len())));
        }
        let h0 = SparseH0::new(model, &basis)?;
        let extra = vec![C64::new(0.0, 0.0); basis.len()];
        Ok(Self { basis, h0, psi: initial.to_vec(), extra, strength, dt, kopts, hermitian: true })
    }

    pub fn state(&self) -> &[C64] {
        &self.psi
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }
}

impl Backend for DenseBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Exact
    }

    fn observe(&mut self) -> Result<(Vec<f64>, f64)> {
        let l = self.basis.sites();
        Ok((self.basis.densities(&self.psi), self.basis.entanglement_entropy(&self.psi, l / 2)?))
    }

    fn densities(&mut self) -> Result<Vec<f64>> {
        Ok(self.basis.densities(&self.psi))
    }

    fn set_signs(&mut self, signs: &[(usize, i8)]) -> Result<()> {
        let l = self.basis.sites();
        let mut coef = vec![0.0; l];
        for &(x, s) in signs {
            if x >= l {
                return Err(Error::Model(format!("measured site {x} outside chain")));
            }
            coef[x] = self.strength * s as f64;
        }
        self.hermitian = coef.iter().all(|&c| c == 0.0);
        for (e, &st) in self.extra.iter_mut().zip(self.basis.states()) {
            let v: f64 = (0..l).filter(|&x| self.basis.occupied(st, x)).map(|x| coef[x]).sum();
            *e = C64::new(0.0, v);
        }
        Ok(())
    }

    fn step(&mut self) -> Result<StepDiagnostics> {
        let h0 = &self.h0;
        let extra = &self.extra;
        let mut out = expm_apply(|x, y| h0.apply(Some(extra), x, y), &self.psi, C64::new(self.dt, 0.0), self.kopts)?;
        let norm = vec_norm(&out);
        if !norm.is_finite() || norm < 1e-150 {
            return Err(Error::VanishingNorm { norm });
        }
        if !self.hermitian {
            scale(&mut out, C64::new(1.0 / norm, 0.0));
        }
        self.psi = out;
        Ok(StepDiagnostics { max_discarded_weight: 0.0, max_bond_dim: 0, norm })
    }

    fn dt(&self) -> f64 {
        self.dt
    }
}

/// Full protocol on the exact backend from a sector vector (normally the
/// dense ground state), Krylov dimension 30.
pub fn dense_trajectory(initial: &[C64], model: &ModelSpec, meas: &MeasurementSpec, dt: f64, rng: RngPolicy) -> TrajectoryRecord {
    let kopts = KrylovOptions { krylov_dim: 30, tol: 1e-12 };
    match DenseBackend::new(initial, model, meas.strength, dt, kopts) {
        Ok(mut b) => drive(&mut b, meas, rng, model.l),
        Err(e) => failed_record(BackendKind::Exact, meas, rng, model.l, e),
    }
}
