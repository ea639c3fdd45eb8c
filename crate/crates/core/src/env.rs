//! Environment contractions and effective operators for MPS algorithms.
//!
//! A left environment at bond `k` holds one block matrix per MPO channel with
//! rows on the bra bond and columns on the ket bond. A right environment holds
//! rows on the ket bond and columns on the bra bond.

use crate::model::MpoSite;
use crate::tensor::{BlockMat, BlockTensor, Sectors};
use crate::C64;

pub type Env = Vec<BlockMat>;

pub fn left_boundary() -> Env {
    vec![BlockMat::identity(&Sectors::single(0))]
}

pub fn right_boundary(filling: usize) -> Env {
    vec![BlockMat::identity(&Sectors::single(filling as i32))]
}

/// Extends a left environment over one site.
pub fn left_update(e: &Env, bra: &BlockTensor, ket: &BlockTensor, w: &MpoSite) -> Env {
    let wr = w.right_dim;
    let mut t: Vec<Option<BlockMat>> = vec![None; e.len() * 2];
    let mut x: Vec<Option<BlockMat>> = vec![None; wr * 2];
    for term in &w.terms {
        if e[term.a].is_zero() {
            continue;
        }
        let ti = term.a * 2 + term.s_in as usize;
        if t[ti].is_none() {
            t[ti] = Some(e[term.a].matmul(&ket.comps[term.s_in as usize]));
        }
        let src = t[ti].as_ref().unwrap();
        let xi = term.b * 2 + term.s_out as usize;
        x[xi]
            .get_or_insert_with(|| BlockMat::zeros(src.rows.clone(), src.cols.clone()))
            .add_scaled(term.coeff, src);
    }
    let mut out: Env = (0..wr).map(|_| BlockMat::zeros(bra.right().clone(), ket.right().clone())).collect();
    let adj: Vec<BlockMat> = bra.comps.iter().map(|c| c.adjoint()).collect();
    for (xi, m) in x.iter().enumerate() {
        if let Some(m) = m {
            adj[xi % 2].mul_acc(m, C64::new(1.0, 0.0), &mut out[xi / 2]);
        }
    }
    out
}

/// Extends a right environment over one site.
pub fn right_update(f: &Env, bra: &BlockTensor, ket: &BlockTensor, w: &MpoSite) -> Env {
    let wl = w.left_dim;
    let mut t: Vec<Option<BlockMat>> = vec![None; f.len() * 2];
    let mut y: Vec<Option<BlockMat>> = vec![None; wl * 2];
    for term in &w.terms {
        if f[term.b].is_zero() {
            continue;
        }
        let ti = term.b * 2 + term.s_in as usize;
        if t[ti].is_none() {
            t[ti] = Some(ket.comps[term.s_in as usize].matmul(&f[term.b]));
        }
        let src = t[ti].as_ref().unwrap();
        let yi = term.a * 2 + term.s_out as usize;
        y[yi]
            .get_or_insert_with(|| BlockMat::zeros(src.rows.clone(), src.cols.clone()))
            .add_scaled(term.coeff, src);
    }
    let mut out: Env = (0..wl).map(|_| BlockMat::zeros(ket.left().clone(), bra.left().clone())).collect();
    let adj: Vec<BlockMat> = bra.comps.iter().map(|c| c.adjoint()).collect();
    for (yi, m) in y.iter().enumerate() {
        if let Some(m) = m {
            m.mul_acc(&adj[yi % 2], C64::new(1.0, 0.0), &mut out[yi / 2]);
        }
    }
    out
}

/// Effective one-site operator applied to `x`.
pub fn apply_one_site(e: &Env, w: &MpoSite, f: &Env, x: &BlockTensor) -> BlockTensor {
    let mut t: Vec<Option<BlockMat>> = vec![None; e.len() * 2];
    let mut y: Vec<Option<BlockMat>> = vec![None; w.right_dim * 2];
    for term in &w.terms {
        if e[term.a].is_zero() || f[term.b].is_zero() {
            continue;
        }
        let ti = term.a * 2 + term.s_in as usize;
        if t[ti].is_none() {
            t[ti] = Some(e[term.a].matmul(&x.comps[term.s_in as usize]));
        }
        let src = t[ti].as_ref().unwrap();
        let yi = term.b * 2 + term.s_out as usize;
        y[yi]
            .get_or_insert_with(|| BlockMat::zeros(src.rows.clone(), src.cols.clone()))
            .add_scaled(term.coeff, src);
    }
    let mut out = BlockTensor::zeros(1, &e[0].rows, &f[0].cols);
    for (yi, m) in y.iter().enumerate() {
        if let Some(m) = m {
            m.mul_acc(&f[yi / 2], C64::new(1.0, 0.0), &mut out.comps[yi % 2]);
        }
    }
    out
}

/// Effective two-site operator applied to `x` (components `s1 * 2 + s2`).
pub fn apply_two_site(e: &Env, w1: &MpoSite, w2: &MpoSite, f: &Env, x: &BlockTensor) -> BlockTensor {
    let wm = w1.right_dim;
    let mut t: Vec<Option<BlockMat>> = vec![None; e.len() * 4];
    let mut u: Vec<Option<BlockMat>> = vec![None; wm * 4];
    for t1 in &w1.terms {
        if e[t1.a].is_zero() {
            continue;
        }
        for i2 in 0..2usize {
            let c_in = t1.s_in as usize * 2 + i2;
            let ti = t1.a * 4 + c_in;
            if t[ti].is_none() {
                t[ti] = Some(e[t1.a].matmul(&x.comps[c_in]));
            }
            let src = t[ti].as_ref().unwrap();
            let ui = t1.b * 4 + t1.s_out as usize * 2 + i2;
            u[ui]
                .get_or_insert_with(|| BlockMat::zeros(src.rows.clone(), src.cols.clone()))
                .add_scaled(t1.coeff, src);
        }
    }
    let mut v: Vec<Option<BlockMat>> = vec![None; w2.right_dim * 4];
    for t2 in &w2.terms {
        if f[t2.b].is_zero() {
            continue;
        }
        for o1 in 0..2usize {
            let Some(src) = u[t2.a * 4 + o1 * 2 + t2.s_in as usize].as_ref() else { continue };
            let vi = t2.b * 4 + o1 * 2 + t2.s_out as usize;
            v[vi]
                .get_or_insert_with(|| BlockMat::zeros(src.rows.clone(), src.cols.clone()))
                .add_scaled(t2.coeff, src);
        }
    }
    let mut out = BlockTensor::zeros(2, &e[0].rows, &f[0].cols);
    for (vi, m) in v.iter().enumerate() {
        if let Some(m) = m {
            m.mul_acc(&f[vi / 4], C64::new(1.0, 0.0), &mut out.comps[vi % 4]);
        }
    }
    out
}

/// Effective bond operator applied to a bond matrix `c`; `e` includes the site left of the bond.
pub fn apply_zero_site(e: &Env, f: &Env, c: &BlockTensor) -> BlockTensor {
    let mut out = BlockTensor::zeros(0, &e[0].rows, &f[0].cols);
    for (ea, fa) in e.iter().zip(f) {
        if ea.is_zero() || fa.is_zero() {
            continue;
        }
        let t = ea.matmul(&c.comps[0]);
        t.mul_acc(fa, C64::new(1.0, 0.0), &mut out.comps[0]);
    }
    out
}
