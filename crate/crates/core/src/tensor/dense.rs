use num_complex::Complex64 as C64;

use super::linalg::{self, Mat};
use crate::error::{Error, Result};

/// Dense complex tensor with row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl ComplexTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {n} entries, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn strides(&self) -> Vec<usize> {
        let mut st = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            st[i] = st[i + 1] * self.shape[i + 1];
        }
        st
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let off: usize = idx.iter().zip(self.strides()).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.data)
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::Shape(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    /// New tensor whose axis `i` is axis `perm[i]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if perm.len() != r || perm.iter().any(|&p| p >= r || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Shape(format!("invalid permutation {perm:?} for rank {r}")));
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let old_st = self.strides();
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let st: Vec<usize> = perm.iter().map(|&p| old_st[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; r];
        let mut off = 0usize;
        for _ in 0..n {
            data.push(self.data[off]);
            for ax in (0..r).rev() {
                idx[ax] += 1;
                off += st[ax];
                if idx[ax] < shape[ax] {
                    break;
                }
                off -= st[ax] * shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape, data })
    }

    /// Matrix view grouping axes `[0, split)` into rows and the rest into columns.
    pub fn to_matrix(&self, split: usize) -> Mat {
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        Mat::from_row_slice(rows, cols, &self.data)
    }

    pub fn from_matrix(m: &Mat, shape: Vec<usize>) -> Result<Self> {
        let data: Vec<C64> = m.transpose().iter().copied().collect();
        Self::new(shape, data)
    }
}

/// Tensor contraction over `axis_pairs` (axis of `a`, axis of `b`).
/// Free axes of `a` come first in their original order, then those of `b`.
pub fn contract(a: &ComplexTensor, b: &ComplexTensor, axis_pairs: &[(usize, usize)]) -> Result<ComplexTensor> {
    for &(i, j) in axis_pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::Shape(format!("axis pair ({i},{j}) out of range")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Shape(format!(
                "contracted dimensions differ: a[{i}]={} b[{j}]={}",
                a.shape[i], b.shape[j]
            )));
        }
    }
    let ca: Vec<usize> = axis_pairs.iter().map(|p| p.0).collect();
    let cb: Vec<usize> = axis_pairs.iter().map(|p| p.1).collect();
    let fa: Vec<usize> = (0..a.rank()).filter(|i| !ca.contains(i)).collect();
    let fb: Vec<usize> = (0..b.rank()).filter(|i| !cb.contains(i)).collect();
    if fa.len() + ca.len() != a.rank() || fb.len() + cb.len() != b.rank() {
        return Err(Error::Shape("repeated axis in contraction".into()));
    }
    let pa: Vec<usize> = fa.iter().chain(&ca).copied().collect();
    let pb: Vec<usize> = cb.iter().chain(&fb).copied().collect();
    let ma = a.permute(&pa)?.to_matrix(fa.len());
    let mb = b.permute(&pb)?.to_matrix(cb.len());
    let mc = linalg::matmul(&ma, &mb);
    let shape: Vec<usize> = fa.iter().map(|&i| a.shape[i]).chain(fb.iter().map(|&i| b.shape[i])).collect();
    ComplexTensor::from_matrix(&mc, shape)
}

#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Shape `shape[..split] + [k]`, left-isometric.
    pub left: ComplexTensor,
    /// Kept singular values in descending order.
    pub singular_values: Vec<f64>,
    /// Shape `[k] + shape[split..]`, right-isometric.
    pub right: ComplexTensor,
    pub discarded_weight: f64,
}

/// SVD of `t` viewed as a matrix split before `split_axis`, truncated to at
/// most `chi_max` values (see [`linalg::truncation_rank`]).
pub fn truncated_svd(t: &ComplexTensor, split_axis: usize, chi_max: usize, weight_floor: f64) -> Result<SvdResult> {
    if split_axis == 0 || split_axis >= t.rank() {
        return Err(Error::Shape(format!("split axis {split_axis} invalid for rank {}", t.rank())));
    }
    if chi_max == 0 {
        return Err(Error::InvalidParameter("chi_max must be positive".into()));
    }
    let m = t.to_matrix(split_axis);
    let dec = linalg::svd(&m)?;
    let (k, discarded_weight) = linalg::truncation_rank(&dec.s, chi_max, weight_floor);
    let u = dec.u.columns(0, k).into_owned();
    let vt = dec.vt.rows(0, k).into_owned();
    let mut ls = t.shape[..split_axis].to_vec();
    ls.push(k);
    let mut rs = vec![k];
    rs.extend_from_slice(&t.shape[split_axis..]);
    Ok(SvdResult {
        left: ComplexTensor::from_matrix(&u, ls)?,
        singular_values: dec.s[..k].to_vec(),
        right: ComplexTensor::from_matrix(&vt, rs)?,
        discarded_weight,
    })
}
