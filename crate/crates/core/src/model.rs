//! Hard-core boson chain: model parameters and matrix-product operators.
//!
//! Sites are indexed from 0. Local basis: 0 = empty, 1 = occupied.
//! Dense vectors use site 0 as the most significant bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, Mat};
use crate::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub l: usize,
    #[serde(default = "default_hopping")]
    pub hopping: f64,
    pub delta: f64,
    /// Particle number; defaults to half filling.
    pub filling: Option<usize>,
}

fn default_hopping() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn new(l: usize, delta: f64) -> Self {
        Self { l, hopping: 1.0, delta, filling: None }
    }

    pub fn particles(&self) -> usize {
        self.filling.unwrap_or(self.l / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 || !self.l.is_multiple_of(2) {
            return Err(Error::Model(format!("chain length must be even and >= 2, got {}", self.l)));
        }
        if self.particles() > self.l {
            return Err(Error::Model(format!("filling {} exceeds {} sites", self.particles(), self.l)));
        }
        if !self.hopping.is_finite() || !self.delta.is_finite() {
            return Err(Error::Model("non-finite coupling".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPolicy {
    /// Signs from the densities at the start of each interval.
    #[default]
    FixedAtIntervalStart,
    /// Signs recomputed from the current densities every time step.
    Instantaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    /// Measurement strength M.
    pub strength: f64,
    /// Probability that a site is measured in a given interval.
    pub probability: f64,
    /// Interval length T.
    #[serde(default = "default_interval")]
    pub interval: f64,
    #[serde(default = "default_t_off")]
    pub t_off: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub sign_policy: SignPolicy,
}

fn default_interval() -> f64 {
    1.0
}
fn default_t_off() -> f64 {
    50.0
}
fn default_t_end() -> f64 {
    60.0
}

impl MeasurementSpec {
    pub fn new(strength: f64, probability: f64) -> Self {
        Self {
            strength,
            probability,
            interval: 1.0,
            t_off: 50.0,
            t_end: 60.0,
            sign_policy: SignPolicy::FixedAtIntervalStart,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(Error::Model(format!("measurement strength must be >= 0, got {}", self.strength)));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::Model(format!("measurement probability must lie in [0,1], got {}", self.probability)));
        }
        if !(self.interval > 0.0) {
            return Err(Error::Model(format!("interval must be positive, got {}", self.interval)));
        }
        if !(self.t_off >= 0.0) || self.t_end < self.t_off {
            return Err(Error::Model(format!("need 0 <= t_off <= t_end, got {} / {}", self.t_off, self.t_end)));
        }
        Ok(())
    }

    /// Number of measured intervals before the measurements are switched off.
    pub fn measured_intervals(&self) -> usize {
        (self.t_off / self.interval + 1e-9).floor() as usize
    }

    /// Number of free-evolution intervals after switch-off.
    pub fn free_intervals(&self) -> usize {
        ((self.t_end - self.t_off) / self.interval + 1e-9).floor() as usize
    }

    /// Largest admissible time step, `0.1 min(1/M, T)`.
    pub fn max_dt(&self) -> f64 {
        let inv_m = if self.strength > 0.0 { 1.0 / self.strength } else { f64::INFINITY };
        0.1 * inv_m.min(self.interval)
    }

    /// Rejects time steps that do not resolve the measurement scales.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Model(format!("time step must be positive, got {dt}")));
        }
        if dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(Error::Model(format!(
                "time step {dt} exceeds 0.1*min(1/M, T) = {} for M = {}, T = {}",
                self.max_dt(),
                self.strength,
                self.interval
            )));
        }
        let n = self.interval / dt;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Model(format!("time step {dt} does not divide the interval {}", self.interval)));
        }
        Ok(())
    }
}

/// One nonzero entry `coeff |s_out><s_in|` of the MPO tensor between channels `a` and `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpoTerm {
    pub a: usize,
    pub b: usize,
    pub s_out: u8,
    pub s_in: u8,
    pub coeff: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpoSite {
    pub left_dim: usize,
    pub right_dim: usize,
    pub terms: Vec<MpoTerm>,
}

impl MpoSite {
    /// Dense tensor with axes `(a, b, s_out, s_in)`.
    pub fn to_tensor(&self) -> ComplexTensor {
        let mut t = ComplexTensor::zeros(vec![self.left_dim, self.right_dim, 2, 2]);
        for term in &self.terms {
            let idx = ((term.a * self.right_dim + term.b) * 2 + term.s_out as usize) * 2 + term.s_in as usize;
            t.data_mut()[idx] += term.coeff;
        }
        t
    }
}

/// Matrix-product operator with sparse site tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Mpo {
    pub sites: Vec<MpoSite>,
    pub hermitian: bool,
}

impl Mpo {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.sites.iter().map(|s| s.right_dim.max(s.left_dim)).max().unwrap_or(0)
    }

    /// Full `2^L x 2^L` matrix. Intended for small chains.
    pub fn to_dense(&self) -> Result<Mat> {
        let l = self.len();
        if l > 12 {
            return Err(Error::InvalidParameter(format!("dense MPO limited to 12 sites, got {l}")));
        }
        let mut chans: Vec<Mat> = vec![Mat::from_element(1, 1, C64::new(1.0, 0.0))];
        for site in &self.sites {
            let dim = chans[0].nrows() * 2;
            let mut next = vec![Mat::zeros(dim, dim); site.right_dim];
            for t in &site.terms {
                let src = &chans[t.a];
                let dst = &mut next[t.b];
                for r in 0..src.nrows() {
                    for c in 0..src.ncols() {
                        let v = src[(r, c)];
                        if v != C64::new(0.0, 0.0) {
                            dst[(2 * r + t.s_out as usize, 2 * c + t.s_in as usize)] += t.coeff * v;
                        }
                    }
                }
            }
            chans = next;
        }
        Ok(chans.swap_remove(0))
    }

    /// Operator product `self * other` (self applied after other).
    pub fn compose(&self, other: &Mpo) -> Result<Mpo> {
        if self.len() != other.len() {
            return Err(Error::Shape("MPO lengths differ".into()));
        }
        let sites = self
            .sites
            .iter()
            .zip(&other.sites)
            .map(|(x, y)| {
                let mut terms = Vec::new();
                for tx in &x.terms {
                    for ty in &y.terms {
                        if tx.s_in == ty.s_out {
                            terms.push(MpoTerm {
                                a: tx.a * y.left_dim + ty.a,
                                b: tx.b * y.right_dim + ty.b,
                                s_out: tx.s_out,
                                s_in: ty.s_in,
                                coeff: tx.coeff * ty.coeff,
                            });
                        }
                    }
                }
                MpoSite { left_dim: x.left_dim * y.left_dim, right_dim: x.right_dim * y.right_dim, terms }
            })
            .collect();
        Ok(Mpo { sites, hermitian: self.hermitian && other.hermitian })
    }
}

/// Nearest-neighbour chain `sum_x [-(J/2)(b+_x b_x+1 + h.c.) + D n_x n_x+1] + sum_x h_x n_x`.
/// Channels: start, b+ pending, b pending, n pending, done.
fn chain_mpo(l: usize, hopping: f64, delta: f64, onsite: &[C64]) -> Mpo {
    let re = |x: f64| C64::new(x, 0.0);
    let mut chans = vec!["start"];
    if hopping != 0.0 {
        chans.push("bdag");
        chans.push("b");
    }
    if delta != 0.0 {
        chans.push("n");
    }
    chans.push("done");
    let w = chans.len();
    let id = |c: &str| chans.iter().position(|x| *x == c).unwrap();
    let done = w - 1;
    let mut bulk: Vec<Vec<MpoTerm>> = Vec::with_capacity(l);
    for &h in onsite.iter().take(l) {
        let mut t = Vec::new();
        let mut push = |a: usize, b: usize, so: u8, si: u8, c: C64| t.push(MpoTerm { a, b, s_out: so, s_in: si, coeff: c });
        push(0, 0, 0, 0, re(1.0));
        push(0, 0, 1, 1, re(1.0));
        if hopping != 0.0 {
            push(0, id("bdag"), 1, 0, re(1.0));
            push(0, id("b"), 0, 1, re(1.0));
            push(id("bdag"), done, 0, 1, re(-0.5 * hopping));
            push(id("b"), done, 1, 0, re(-0.5 * hopping));
        }
        if delta != 0.0 {
            push(0, id("n"), 1, 1, re(1.0));
            push(id("n"), done, 1, 1, re(delta));
        }
        if h != C64::new(0.0, 0.0) {
            push(0, done, 1, 1, h);
        }
        push(done, done, 0, 0, re(1.0));
        push(done, done, 1, 1, re(1.0));
        bulk.push(t);
    }
    let sites = bulk
        .into_iter()
        .enumerate()
        .map(|(k, terms)| {
            let first = k == 0;
            let last = k + 1 == l;
            let terms: Vec<MpoTerm> = terms
                .into_iter()
                .filter(|t| (!first || t.a == 0) && (!last || t.b == done))
                .map(|mut t| {
                    if last {
                        t.b = 0;
                    }
                    t
                })
                .collect();
            MpoSite { left_dim: if first { 1 } else { w }, right_dim: if last { 1 } else { w }, terms }
        })
        .collect();
    let hermitian = onsite.iter().all(|h| h.im == 0.0);
    Mpo { sites, hermitian }
}

/// Interaction-free reference Hamiltonian H0.
pub fn build_h0(model: &ModelSpec) -> Result<Mpo> {
    model.validate()?;
    Ok(chain_mpo(model.l, model.hopping, model.delta, &vec![C64::new(0.0, 0.0); model.l]))
}

fn measurement_onsite(l: usize, strength: f64, events: &[(usize, i8)]) -> Result<Vec<C64>> {
    let mut onsite = vec![C64::new(0.0, 0.0); l];
    let mut seen = vec![false; l];
    for &(x, s) in events {
        if x >= l {
            return Err(Error::Model(format!("measured site {x} outside chain of {l} sites")));
        }
        if seen[x] {
            return Err(Error::Model(format!("site {x} measured twice in one interval")));
        }
        if s != 1 && s != -1 {
            return Err(Error::Model(format!("measurement sign must be +1 or -1, got {s}")));
        }
        seen[x] = true;
        onsite[x] = C64::new(0.0, strength * s as f64);
    }
    Ok(onsite)
}

/// Anti-Hermitian measurement term `i M sum_x sign_x n_x` over `(site, sign)` events.
pub fn build_h_meas(l: usize, meas: &MeasurementSpec, events: &[(usize, i8)]) -> Result<Mpo> {
    let onsite = measurement_onsite(l, meas.strength, events)?;
    Ok(chain_mpo(l, 0.0, 0.0, &onsite))
}

/// `H0 + H_meas` as a single MPO with the bond dimension of H0.
pub fn build_interval_hamiltonian(model: &ModelSpec, meas: &MeasurementSpec, events: &[(usize, i8)]) -> Result<Mpo> {
    model.validate()?;
    let onsite = measurement_onsite(model.l, meas.strength, events)?;
    Ok(chain_mpo(model.l, model.hopping, model.delta, &onsite))
}

/// Total particle number as an MPO.
pub fn number_operator(l: usize) -> Mpo {
    chain_mpo(l, 0.0, 0.0, &vec![C64::new(1.0, 0.0); l])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{SectorBasis, SparseH0};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn two_site_hopping_element() {
        let h = build_h0(&ModelSpec::new(2, 0.0)).unwrap().to_dense().unwrap();
        // |01> is index 1, |10> is index 2.
        assert!((h[(1, 2)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((h[(2, 1)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(h[(3, 3)].norm() < 1e-15);
    }

    #[test]
    fn two_site_interaction_element() {
        let h = build_h0(&ModelSpec::new(2, -0.5)).unwrap().to_dense().unwrap();
        assert!((h[(3, 3)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert_eq!(build_h0(&ModelSpec::new(2, -0.5)).unwrap().max_bond_dim(), 5);
    }

    #[test]
    fn h0_matches_sparse_sector_matrix() {
        for &(l, d) in &[(4usize, 0.0), (6, -0.5), (8, 1.5)] {
            let model = ModelSpec::new(l, d);
            let full = build_h0(&model).unwrap().to_dense().unwrap();
            assert!((&full - full.adjoint()).camax() < 1e-14);
            for n in 0..=l {
                let basis = SectorBasis::new(l, n).unwrap();
                let sparse = SparseH0::new(&ModelSpec { filling: Some(n), ..model.clone() }, &basis).unwrap().to_dense();
                for (i, &si) in basis.states().iter().enumerate() {
                    for (j, &sj) in basis.states().iter().enumerate() {
                        assert!((full[(si as usize, sj as usize)] - sparse[(i, j)]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn h0_conserves_particle_number() {
        let h = build_h0(&ModelSpec::new(6, 0.7)).unwrap().to_dense().unwrap();
        let n = number_operator(6).to_dense().unwrap();
        assert!((&h * &n - &n * &h).camax() < 1e-12);
    }

    #[test]
    fn measurement_term_is_anti_hermitian_diagonal() {
        let meas = MeasurementSpec::new(2.0, 1.0);
        let hm = build_h_meas(4, &meas, &[(0, 1), (2, -1)]).unwrap().to_dense().unwrap();
        assert!((&hm + hm.adjoint()).camax() < 1e-14);
        // |1010> = index 10: i M (1 - 1) = 0; |1000> = 8: i M.
        assert!(hm[(10, 10)].norm() < 1e-15);
        assert!((hm[(8, 8)] - c(0.0, 2.0)).norm() < 1e-15);
        assert!((hm[(2, 2)] - c(0.0, -2.0)).norm() < 1e-15);
        let off: f64 = (0..16).flat_map(|i| (0..16).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| hm[(i, j)].norm()).sum();
        assert_eq!(off, 0.0);
    }

    #[test]
    fn empty_events_give_zero_operator() {
        let hm = build_h_meas(4, &MeasurementSpec::new(2.0, 1.0), &[]).unwrap().to_dense().unwrap();
        assert_eq!(hm.camax(), 0.0);
    }

    #[test]
    fn duplicate_site_is_rejected() {
        let r = build_h_meas(4, &MeasurementSpec::new(2.0, 1.0), &[(1, 1), (1, -1)]);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn interval_hamiltonian_is_sum() {
        let model = ModelSpec::new(6, -0.5);
        let meas = MeasurementSpec::new(0.3, 1.0);
        let ev = [(0, 1), (3, -1), (5, 1)];
        let tot = build_interval_hamiltonian(&model, &meas, &ev).unwrap();
        assert_eq!(tot.max_bond_dim(), 5);
        let sum = build_h0(&model).unwrap().to_dense().unwrap() + build_h_meas(6, &meas, &ev).unwrap().to_dense().unwrap();
        assert!((tot.to_dense().unwrap() - sum).camax() < 1e-14);
    }

    #[test]
    fn time_step_bound_enforced() {
        let meas = MeasurementSpec::new(10.0, 1.0);
        assert!(meas.check_dt(0.005).is_ok());
        assert!(meas.check_dt(0.01).is_ok());
        assert!(meas.check_dt(0.02).is_err());
        assert!(MeasurementSpec::new(0.1, 1.0).check_dt(0.1).is_ok());
    }

    #[test]
    fn invalid_lengths_rejected() {
        assert!(build_h0(&ModelSpec::new(3, 0.0)).is_err());
        assert!(build_h0(&ModelSpec::new(0, 0.0)).is_err());
    }
}
