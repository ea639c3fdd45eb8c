//! U(1) block-sparse matrices. Rows and columns are split into charge sectors
//! and only blocks between sectors allowed by charge conservation are stored.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::linalg::{gemm, Mat};
use crate::error::{Error, Result};

const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Charge sectors of a bond, sorted by charge, all with nonzero dimension.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Sectors {
    charges: Vec<i32>,
    dims: Vec<usize>,
}

impl Sectors {
    /// Sectors from `(charge, dim)` pairs; zero dimensions are dropped and
    /// repeated charges merged.
    pub fn new(mut pairs: Vec<(i32, usize)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut charges: Vec<i32> = Vec::with_capacity(pairs.len());
        let mut dims: Vec<usize> = Vec::with_capacity(pairs.len());
        for (q, d) in pairs {
            if d == 0 {
                continue;
            }
            if charges.last() == Some(&q) {
                *dims.last_mut().unwrap() += d;
            } else {
                charges.push(q);
                dims.push(d);
            }
        }
        Self { charges, dims }
    }

    pub fn single(charge: i32) -> Self {
        Self { charges: vec![charge], dims: vec![1] }
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn charge(&self, i: usize) -> i32 {
        self.charges[i]
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn find(&self, q: i32) -> Option<usize> {
        self.charges.binary_search(&q).ok()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Offset of each sector in the dense ordering (sectors by ascending charge).
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.len());
        let mut acc = 0;
        for &d in &self.dims {
            off.push(acc);
            acc += d;
        }
        off
    }
}

/// Block-sparse matrix between two sets of sectors.
#[derive(Clone, Debug)]
pub struct BlockMat {
    pub rows: Sectors,
    pub cols: Sectors,
    pub blocks: BTreeMap<(usize, usize), Mat>,
}

impl BlockMat {
    pub fn zeros(rows: Sectors, cols: Sectors) -> Self {
        Self { rows, cols, blocks: BTreeMap::new() }
    }

    pub fn identity(s: &Sectors) -> Self {
        let mut m = Self::zeros(s.clone(), s.clone());
        for i in 0..s.len() {
            m.blocks.insert((i, i), Mat::identity(s.dim(i), s.dim(i)));
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn insert(&mut self, i: usize, j: usize, m: Mat) {
        debug_assert_eq!(m.shape(), (self.rows.dim(i), self.cols.dim(j)));
        self.blocks.insert((i, j), m);
    }

    /// `out += alpha * self * other`
    pub fn mul_acc(&self, other: &BlockMat, alpha: C64, out: &mut BlockMat) {
        debug_assert_eq!(self.cols, other.rows);
        for (&(i, k), a) in &self.blocks {
            for (&(_, j), b) in other.blocks.range((k, 0)..=(k, usize::MAX)) {
                match out.blocks.get_mut(&(i, j)) {
                    Some(c) => gemm(alpha, a, b, ONE, c),
                    None => {
                        let mut c = Mat::zeros(a.nrows(), b.ncols());
                        gemm(alpha, a, b, C64::new(0.0, 0.0), &mut c);
                        out.blocks.insert((i, j), c);
                    }
                }
            }
        }
    }

    pub fn matmul(&self, other: &BlockMat) -> BlockMat {
        let mut out = BlockMat::zeros(self.rows.clone(), other.cols.clone());
        self.mul_acc(other, ONE, &mut out);
        out
    }

    pub fn adjoint(&self) -> BlockMat {
        let mut out = BlockMat::zeros(self.cols.clone(), self.rows.clone());
        for (&(i, j), b) in &self.blocks {
            out.blocks.insert((j, i), b.adjoint());
        }
        out
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: C64, other: &BlockMat) {
        for (&key, b) in &other.blocks {
            match self.blocks.get_mut(&key) {
                Some(a) => a.zip_apply(b, |x, y| *x += alpha * y),
                None => {
                    self.blocks.insert(key, b * alpha);
                }
            }
        }
    }

    pub fn scale(&mut self, alpha: C64) {
        for b in self.blocks.values_mut() {
            *b *= alpha;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.blocks.values().map(|b| b.norm_squared()).sum()
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().filter(|((i, j), _)| i == j).map(|(_, b)| b.trace()).sum()
    }

    pub fn to_dense(&self) -> Mat {
        let ro = self.rows.offsets();
        let co = self.cols.offsets();
        let mut m = Mat::zeros(self.rows.total_dim(), self.cols.total_dim());
        for (&(i, j), b) in &self.blocks {
            m.view_mut((ro[i], co[j]), b.shape()).copy_from(b);
        }
        m
    }
}

/// Tensor with a left bond, `nsites` physical legs of dimension 2 and a right
/// bond. Component `c` holds the matrix for physical configuration `c`
/// (first site most significant), whose right charge exceeds the left charge
/// by the number of occupied sites in `c`. `nsites = 0` is a bond matrix.
#[derive(Clone, Debug)]
pub struct BlockTensor {
    pub nsites: usize,
    pub comps: Vec<BlockMat>,
}

impl BlockTensor {
    pub fn zeros(nsites: usize, left: &Sectors, right: &Sectors) -> Self {
        let n = 1usize << nsites;
        Self { nsites, comps: (0..n).map(|_| BlockMat::zeros(left.clone(), right.clone())).collect() }
    }

    pub fn left(&self) -> &Sectors {
        &self.comps[0].rows
    }

    pub fn right(&self) -> &Sectors {
        &self.comps[0].cols
    }

    pub fn shift(c: usize) -> i32 {
        c.count_ones() as i32
    }

    pub fn norm_sqr(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&mut self, alpha: C64) {
        for c in &mut self.comps {
            c.scale(alpha);
        }
    }

    /// All charge-allowed blocks `(component, row sector, col sector)`.
    pub fn layout(&self) -> Layout {
        Layout::new(self.nsites, self.left(), self.right())
    }

    pub fn flatten(&self, layout: &Layout) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); layout.len];
        for e in &layout.entries {
            if let Some(b) = self.comps[e.comp].blocks.get(&(e.row, e.col)) {
                v[e.offset..e.offset + e.rows * e.cols].copy_from_slice(b.as_slice());
            }
        }
        v
    }

    pub fn unflatten(layout: &Layout, v: &[C64]) -> Self {
        let mut t = Self::zeros(layout.nsites, &layout.left, &layout.right);
        for e in &layout.entries {
            let m = Mat::from_column_slice(e.rows, e.cols, &v[e.offset..e.offset + e.rows * e.cols]);
            t.comps[e.comp].blocks.insert((e.row, e.col), m);
        }
        t
    }

    /// Checks that every stored block is allowed by charge conservation.
    pub fn check_charges(&self) -> Result<()> {
        for (c, m) in self.comps.iter().enumerate() {
            for &(i, j) in m.blocks.keys() {
                if m.cols.charge(j) - m.rows.charge(i) != Self::shift(c) {
                    return Err(Error::Shape(format!("block ({i},{j}) of component {c} violates charge")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LayoutEntry {
    pub comp: usize,
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

/// Flat ordering of the allowed blocks of a [`BlockTensor`].
#[derive(Clone, Debug)]
pub struct Layout {
    pub nsites: usize,
    pub left: Sectors,
    pub right: Sectors,
    pub entries: Vec<LayoutEntry>,
    pub len: usize,
}

impl Layout {
    pub fn new(nsites: usize, left: &Sectors, right: &Sectors) -> Self {
        let mut entries = Vec::new();
        let mut off = 0;
        for comp in 0..(1usize << nsites) {
            let s = BlockTensor::shift(comp);
            for i in 0..left.len() {
                if let Some(j) = right.find(left.charge(i) + s) {
                    let (r, c) = (left.dim(i), right.dim(j));
                    entries.push(LayoutEntry { comp, row: i, col: j, rows: r, cols: c, offset: off });
                    off += r * c;
                }
            }
        }
        Self { nsites, left: left.clone(), right: right.clone(), entries, len: off }
    }
}
