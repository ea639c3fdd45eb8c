//! Thin helpers over nalgebra matrices: fast complex products and ordered SVD.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Mat = DMatrix<C64>;

/// Singular values below this fraction of the largest are always discarded.
pub const SVD_NOISE_FLOOR: f64 = 1e-14;

/// `c = alpha * a * b + beta * c` through matrixmultiply's complex kernel.
pub fn gemm(alpha: C64, a: &Mat, b: &Mat, beta: C64, c: &mut Mat) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == C64::new(0.0, 0.0) {
            c.fill(C64::new(0.0, 0.0));
        } else {
            *c *= beta;
        }
        return;
    }
    if m * n * k <= SMALL_GEMM {
        small_gemm(alpha, a, b, beta, c);
        return;
    }
    // SAFETY: Complex64 is repr(C) with two f64 fields, the same layout as [f64; 2];
    // pointers and strides describe the column-major storage of the three matrices.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

/// Below this many multiply-adds the packing in matrixmultiply costs more than it saves.
const SMALL_GEMM: usize = 6 * 6 * 6;

fn small_gemm(alpha: C64, a: &Mat, b: &Mat, beta: C64, c: &mut Mat) {
    let (m, k) = a.shape();
    let n = b.ncols();
    let zero = C64::new(0.0, 0.0);
    if beta == zero {
        c.fill(zero);
    } else if beta != C64::new(1.0, 0.0) {
        *c *= beta;
    }
    let (a, b, c) = (a.as_slice(), b.as_slice(), c.as_mut_slice());
    for j in 0..n {
        let cj = &mut c[j * m..(j + 1) * m];
        for p in 0..k {
            let f = alpha * b[j * k + p];
            let ap = &a[p * m..(p + 1) * m];
            for i in 0..m {
                cj[i] += ap[i] * f;
            }
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut c = Mat::zeros(a.nrows(), b.ncols());
    gemm(C64::new(1.0, 0.0), a, b, C64::new(0.0, 0.0), &mut c);
    c
}

/// `a† b`
pub fn matmul_adj(a: &Mat, b: &Mat) -> Mat {
    matmul(&a.adjoint(), b)
}

/// `a b†`
pub fn matmul_adj_right(a: &Mat, b: &Mat) -> Mat {
    matmul(a, &b.adjoint())
}

pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub vt: Mat,
}

/// Thin SVD with singular values sorted in descending order.
pub fn svd(m: &Mat) -> Result<Svd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd { u: Mat::zeros(r, 0), s: vec![], vt: Mat::zeros(0, c) });
    }
    let fm = faer::Mat::<C64>::from_fn(r, c, |i, j| m[(i, j)]);
    let dec = fm.thin_svd().map_err(|e| Error::Numerical(format!("SVD failed on {r}x{c} matrix: {e:?}")))?;
    let (fu, fv) = (dec.U(), dec.V());
    let fs = dec.S().column_vector();
    let u = Mat::from_fn(r, k, |i, j| fu[(i, j)]);
    let vt = Mat::from_fn(k, c, |i, j| fv[(j, i)].conj());
    let s = (0..k).map(|i| fs[i].re).collect();
    Ok(Svd { u, s, vt })
}

/// Number of singular values to keep from a descending list and the discarded
/// weight (dropped sum of squares over total sum of squares).
///
/// Values below `SVD_NOISE_FLOOR * s_max` are always dropped, at most `chi_max`
/// are kept, and trailing values are then removed while their cumulative
/// weight stays below `weight_floor`. At least one value survives.
pub fn truncation_rank(s: &[f64], chi_max: usize, weight_floor: f64) -> (usize, f64) {
    if s.is_empty() {
        return (0, 0.0);
    }
    let total: f64 = s.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return (1, 0.0);
    }
    let cutoff = SVD_NOISE_FLOOR * s[0];
    let mut keep = s.iter().take_while(|&&x| x > cutoff).count().max(1);
    keep = keep.min(chi_max.max(1));
    let mut dropped = s[keep..].iter().fold(0.0, |acc, x| acc + x * x);
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if (dropped + w) / total < weight_floor {
            dropped += w;
            keep -= 1;
        } else {
            break;
        }
    }
    (keep, dropped / total)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>`
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(v: &mut [C64], f: C64) {
    for x in v {
        *x *= f;
    }
}
