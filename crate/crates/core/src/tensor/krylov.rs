//! Krylov-subspace propagation (Arnoldi) and ground-state search (Lanczos).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::dense::ComplexTensor;
use super::linalg::{axpy, scale, vdot, vec_norm, Mat};
use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    pub krylov_dim: usize,
    /// Error tolerance relative to the norm of the input vector.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { krylov_dim: 20, tol: 1e-10 }
    }
}

/// Computes `exp(-i dt Op) v` for a generic (possibly non-Hermitian) linear map.
///
/// The result is not renormalized. When the Krylov space of dimension
/// `krylov_dim` is not accurate enough for the full step, the step is split
/// and the Arnoldi process restarted from the partially propagated vector.
pub fn expm_apply<F>(mut apply: F, v: &[C64], dt: C64, opts: KrylovOptions) -> Result<Vec<C64>>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if opts.krylov_dim == 0 {
        return Err(Error::InvalidParameter("krylov_dim must be positive".into()));
    }
    let n = v.len();
    let mut w = v.to_vec();
    let beta0 = vec_norm(v);
    if beta0 == 0.0 || dt == ZERO {
        return Ok(w);
    }
    let mut remaining = 1.0f64;
    let mut restarts = 0usize;
    while remaining > 0.0 {
        let beta = vec_norm(&w);
        if beta == 0.0 {
            return Ok(w);
        }
        let mdim = opts.krylov_dim.min(n);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(mdim + 1);
        let mut q = w.clone();
        scale(&mut q, C64::new(1.0 / beta, 0.0));
        basis.push(q);
        let mut h = Mat::zeros(mdim + 1, mdim);
        let mut tmp = vec![ZERO; n];
        let mut m_used = mdim;
        let mut breakdown = false;
        let mut accepted: Option<(f64, Vec<C64>)> = None;
        for j in 0..mdim {
            apply(&basis[j], &mut tmp);
            let mut wj = tmp.clone();
            for _ in 0..2 {
                for (i, bi) in basis.iter().enumerate() {
                    let c = vdot(bi, &wj);
                    h[(i, j)] += c;
                    axpy(-c, bi, &mut wj);
                }
            }
            let hn = vec_norm(&wj);
            h[(j + 1, j)] = C64::new(hn, 0.0);
            let scale_h: f64 = (0..=j).map(|i| h[(i, j)].norm()).fold(0.0, f64::max).max(1.0);
            if hn <= 1e-13 * scale_h {
                m_used = j + 1;
                breakdown = true;
                break;
            }
            // Early exit once the whole remaining step is accurate.
            let m = j + 1;
            let (err, y) = step_error(&h, m, dt * remaining, hn);
            if err < opts.tol * remaining || m == mdim {
                if err < opts.tol * remaining {
                    accepted = Some((remaining, y));
                }
                m_used = m;
                if m < mdim {
                    break;
                }
            }
            if m < mdim {
                scale(&mut wj, C64::new(1.0 / hn, 0.0));
                basis.push(wj);
            }
        }
        let (frac, y) = if breakdown {
            let hm = h.view((0, 0), (m_used, m_used)).into_owned();
            (remaining, first_column_exp(&hm, dt * remaining))
        } else if let Some(acc) = accepted {
            acc
        } else {
            let hn = h[(m_used, m_used - 1)].re;
            let mut tau = remaining;
            let mut found = None;
            for _ in 0..60 {
                tau *= 0.5;
                let (err, y) = step_error(&h, m_used, dt * tau, hn);
                if err < opts.tol * tau {
                    found = Some((tau, y));
                    break;
                }
            }
            match found {
                Some(f) => f,
                None => {
                    let (err, _) = step_error(&h, m_used, dt * remaining, hn);
                    return Err(Error::Convergence { context: "Krylov exponential".into(), residual: err });
                }
            }
        };
        let mut out = vec![ZERO; n];
        for (i, yi) in y.iter().enumerate().take(m_used) {
            axpy(yi * beta, &basis[i], &mut out);
        }
        w = out;
        remaining -= frac;
        if remaining < 1e-14 {
            remaining = 0.0;
        }
        restarts += 1;
        if restarts > 100_000 {
            return Err(Error::Convergence { context: "Krylov exponential restarts".into(), residual: remaining });
        }
    }
    Ok(w)
}

/// First column of `exp(-i dt H)` for a small square matrix.
fn first_column_exp(hm: &Mat, dt: C64) -> Vec<C64> {
    let e = (hm * (C64::new(0.0, -1.0) * dt)).exp();
    e.column(0).iter().copied().collect()
}

/// Error estimate `h_{m+1,m} |[exp(-i dt H_m) e1]_m|` and the Krylov coefficients.
fn step_error(h: &Mat, m: usize, dt: C64, hnext: f64) -> (f64, Vec<C64>) {
    let hm = h.view((0, 0), (m, m)).into_owned();
    let y = first_column_exp(&hm, dt);
    let err = hnext * y[m - 1].norm();
    (err, y)
}

/// Tensor-level wrapper: returns `exp(-i dt Op) v` with `Op` given as a tensor map.
pub fn krylov_expm_apply<F>(mut apply_op: F, v: &ComplexTensor, dt: C64, krylov_dim: usize, tol: f64) -> Result<ComplexTensor>
where
    F: FnMut(&ComplexTensor) -> ComplexTensor,
{
    let shape = v.shape().to_vec();
    let out = expm_apply(
        |x, y| {
            let t = ComplexTensor::new(shape.clone(), x.to_vec()).expect("shape preserved");
            y.copy_from_slice(apply_op(&t).data());
        },
        v.data(),
        dt,
        KrylovOptions { krylov_dim, tol },
    )?;
    ComplexTensor::new(shape, out)
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub max_dim: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_dim: 40, tol: 1e-10, max_restarts: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

/// Lowest eigenpair of a Hermitian map by restarted Lanczos with full
/// reorthogonalization. `v0` must be nonzero.
pub fn lanczos_ground<F>(mut apply: F, v0: &[C64], opts: LanczosOptions) -> Result<EigenPair>
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = v0.len();
    let mut x = v0.to_vec();
    let nx = vec_norm(&x);
    if nx == 0.0 {
        return Err(Error::InvalidParameter("Lanczos start vector is zero".into()));
    }
    scale(&mut x, C64::new(1.0 / nx, 0.0));
    let mut tmp = vec![ZERO; n];
    let mut last = (f64::INFINITY, f64::INFINITY);
    for _ in 0..opts.max_restarts.max(1) {
        let mdim = opts.max_dim.min(n).max(1);
        let mut basis: Vec<Vec<C64>> = vec![x.clone()];
        let mut alpha = Vec::with_capacity(mdim);
        let mut beta: Vec<f64> = Vec::with_capacity(mdim);
        let mut ritz = (0.0, vec![1.0]);
        let mut done = false;
        for j in 0..mdim {
            apply(&basis[j], &mut tmp);
            let mut w = tmp.clone();
            let a = vdot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = vdot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let bn = vec_norm(&w);
            let m = j + 1;
            let t = DMatrix::<f64>::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &emin) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            let y: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
            let res = bn * y[m - 1].abs();
            ritz = (emin, y);
            if res < opts.tol || bn < 1e-14 * a.abs().max(1.0) {
                done = true;
                last = (emin, res);
                break;
            }
            last = (emin, res);
            if m < mdim {
                beta.push(bn);
                scale(&mut w, C64::new(1.0 / bn, 0.0));
                basis.push(w);
            }
        }
        let mut v = vec![ZERO; n];
        for (b, &c) in basis.iter().zip(&ritz.1) {
            axpy(C64::new(c, 0.0), b, &mut v);
        }
        let nv = vec_norm(&v);
        scale(&mut v, C64::new(1.0 / nv, 0.0));
        if done || n <= opts.max_dim {
            // Recompute the true residual for the report.
            apply(&v, &mut tmp);
            axpy(C64::new(-ritz.0, 0.0), &v, &mut tmp);
            let res = vec_norm(&tmp);
            if done || res < opts.tol {
                return Ok(EigenPair { value: ritz.0, vector: v, residual: res });
            }
        }
        x = v;
    }
    Err(Error::Convergence { context: "Lanczos ground state".into(), residual: last.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::linalg::matmul;
    use rand::{Rng, SeedableRng};

    fn random_mat(n: usize, seed: u64) -> Mat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn apply_mat(m: &Mat) -> impl FnMut(&[C64], &mut [C64]) + '_ {
        move |x, y| {
            let v = Mat::from_column_slice(x.len(), 1, x);
            y.copy_from_slice(matmul(m, &v).as_slice());
        }
    }

    #[test]
    fn zero_operator_leaves_vector() {
        let v = vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let out = expm_apply(|_, y| y.fill(C64::new(0.0, 0.0)), &v, C64::new(0.7, 0.0), KrylovOptions::default()).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn anti_hermitian_number_term_amplifies() {
        // Op = i M n with n = diag(1, 0): the occupied amplitude grows by e^{M t}.
        let (m, t) = (2.0, 0.3);
        let op = Mat::from_row_slice(2, 2, &[C64::new(0.0, m), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let v = vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)];
        let out = expm_apply(apply_mat(&op), &v, C64::new(t, 0.0), KrylovOptions::default()).unwrap();
        assert!((out[0] - C64::new(0.6 * (m * t).exp(), 0.0)).norm() < 1e-12);
        assert!((out[1] - C64::new(0.8, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pauli_x_half_period() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let op = Mat::from_row_slice(2, 2, &[zero, one, one, zero]);
        let out = expm_apply(apply_mat(&op), &[one, zero], C64::new(std::f64::consts::PI, 0.0), KrylovOptions::default()).unwrap();
        assert!((out[0] + one).norm() < 1e-10);
        assert!(out[1].norm() < 1e-10);
    }

    #[test]
    fn matches_dense_exponential_non_hermitian() {
        let a = random_mat(16, 11);
        let v: Vec<C64> = random_mat(16, 12).column(0).iter().copied().collect();
        let dt = C64::new(0.8, 0.0);
        let dense = (&a * (C64::new(0.0, -1.0) * dt)).exp() * Mat::from_column_slice(16, 1, &v);
        for dim in [6, 10, 20] {
            let out = expm_apply(apply_mat(&a), &v, dt, KrylovOptions { krylov_dim: dim, tol: 1e-10 }).unwrap();
            let err = out.iter().zip(dense.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-8, "dim {dim}: {err}");
        }
    }

    #[test]
    fn hermitian_evolution_preserves_norm() {
        let a = random_mat(30, 5);
        let h = &a + a.adjoint();
        let v: Vec<C64> = random_mat(30, 6).column(0).iter().copied().collect();
        let n0 = vec_norm(&v);
        let out = expm_apply(apply_mat(&h), &v, C64::new(2.5, 0.0), KrylovOptions::default()).unwrap();
        assert!((vec_norm(&out) - n0).abs() < 1e-10);
    }

    #[test]
    fn lanczos_finds_lowest_eigenvalue() {
        let a = random_mat(50, 7);
        let h = &a + a.adjoint();
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let emin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let v0 = vec![C64::new(1.0, 0.0); 50];
        let res = lanczos_ground(apply_mat(&h), &v0, LanczosOptions { max_dim: 20, tol: 1e-10, max_restarts: 500 }).unwrap();
        assert!((res.value - emin).abs() < 1e-9, "{} vs {emin}", res.value);
        assert!(res.residual < 1e-8);
    }
}
