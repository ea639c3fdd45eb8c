//! Charge-conserving matrix-product states in mixed canonical form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::env::{self, Env};
use crate::error::{Error, Result};
use crate::model::Mpo;
use crate::tensor::linalg::{self, Mat};
use crate::tensor::{BlockMat, BlockTensor, Sectors};
use crate::C64;

const SNAPSHOT_MAGIC: &[u8; 4] = b"MPSQ";
const SNAPSHOT_VERSION: u32 = 1;

/// Result of splitting a block tensor at a new bond.
pub struct Split {
    /// Left part with isometric columns.
    pub u: BlockTensor,
    /// Singular values per sector of the new bond, descending.
    pub s: Vec<Vec<f64>>,
    /// Right part with isometric rows.
    pub vt: BlockTensor,
    pub discarded_weight: f64,
}

impl Split {
    pub fn bond(&self) -> &Sectors {
        self.u.right()
    }

    /// All kept singular values, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.s.iter().flatten().copied().collect();
        all.sort_by(|a, b| b.partial_cmp(a).unwrap());
        all
    }

    pub fn into_left_canonical(self) -> (BlockTensor, BlockTensor) {
        let mut vt = self.vt;
        scale_rows(&mut vt, &self.s);
        (self.u, vt)
    }

    pub fn into_right_canonical(self) -> (BlockTensor, BlockTensor) {
        let mut u = self.u;
        scale_cols(&mut u, &self.s);
        (u, self.vt)
    }
}

fn scale_rows(t: &mut BlockTensor, s: &[Vec<f64>]) {
    for comp in &mut t.comps {
        for (&(i, _), b) in comp.blocks.iter_mut() {
            for (r, &sv) in s[i].iter().enumerate() {
                b.row_mut(r).scale_mut(sv);
            }
        }
    }
}

fn scale_cols(t: &mut BlockTensor, s: &[Vec<f64>]) {
    for comp in &mut t.comps {
        for (&(_, j), b) in comp.blocks.iter_mut() {
            for (c, &sv) in s[j].iter().enumerate() {
                b.column_mut(c).scale_mut(sv);
            }
        }
    }
}

/// SVD of `t` across the bond after its first `n_left` physical legs, per
/// charge sector, with global truncation.
pub fn svd_split(t: &BlockTensor, n_left: usize, chi_max: usize, weight_floor: f64) -> Result<Split> {
    let n = t.nsites;
    let nr = n - n_left;
    let left = t.left();
    let right = t.right();
    // Row pieces (cl, i) and column pieces (cr, j) grouped by middle charge.
    let mut rows_by_q: BTreeMap<i32, Vec<(usize, usize)>> = BTreeMap::new();
    for cl in 0..(1usize << n_left) {
        for i in 0..left.len() {
            rows_by_q.entry(left.charge(i) + cl.count_ones() as i32).or_default().push((cl, i));
        }
    }
    let mut cols_by_q: BTreeMap<i32, Vec<(usize, usize)>> = BTreeMap::new();
    for cr in 0..(1usize << nr) {
        for j in 0..right.len() {
            cols_by_q.entry(right.charge(j) - cr.count_ones() as i32).or_default().push((cr, j));
        }
    }
    struct Part {
        q: i32,
        rows: Vec<(usize, usize, usize)>,
        cols: Vec<(usize, usize, usize)>,
        svd: linalg::Svd,
    }
    let mut parts = Vec::new();
    for (&q, rp) in &rows_by_q {
        let Some(cp) = cols_by_q.get(&q) else { continue };
        let mut rows = Vec::new();
        let mut nrow = 0;
        for &(cl, i) in rp {
            rows.push((cl, i, nrow));
            nrow += left.dim(i);
        }
        let mut cols = Vec::new();
        let mut ncol = 0;
        for &(cr, j) in cp {
            cols.push((cr, j, ncol));
            ncol += right.dim(j);
        }
        let mut m = Mat::zeros(nrow, ncol);
        let mut any = false;
        for &(cl, i, ro) in &rows {
            for &(cr, j, co) in &cols {
                if let Some(b) = t.comps[(cl << nr) | cr].blocks.get(&(i, j)) {
                    m.view_mut((ro, co), b.shape()).copy_from(b);
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        let svd = linalg::svd(&m)?;
        parts.push(Part { q, rows, cols, svd });
    }
    let mut all: Vec<(f64, usize)> = Vec::new();
    for (pi, p) in parts.iter().enumerate() {
        all.extend(p.svd.s.iter().map(|&s| (s, pi)));
    }
    if all.is_empty() {
        return Err(Error::VanishingNorm { norm: 0.0 });
    }
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let sv: Vec<f64> = all.iter().map(|a| a.0).collect();
    let (keep, discarded_weight) = linalg::truncation_rank(&sv, chi_max, weight_floor);
    let mut kept = vec![0usize; parts.len()];
    for a in &all[..keep] {
        kept[a.1] += 1;
    }
    let bond = Sectors::new(parts.iter().zip(&kept).map(|(p, &k)| (p.q, k)).collect());
    let mut u = BlockTensor::zeros(n_left, left, &bond);
    let mut vt = BlockTensor::zeros(nr, &bond, right);
    let mut s = vec![Vec::new(); bond.len()];
    for (p, &k) in parts.iter().zip(&kept) {
        if k == 0 {
            continue;
        }
        let qi = bond.find(p.q).unwrap();
        s[qi] = p.svd.s[..k].to_vec();
        for &(cl, i, ro) in &p.rows {
            let blk = p.svd.u.view((ro, 0), (left.dim(i), k)).into_owned();
            u.comps[cl].insert(i, qi, blk);
        }
        for &(cr, j, co) in &p.cols {
            let blk = p.svd.vt.view((0, co), (k, right.dim(j))).into_owned();
            vt.comps[cr].insert(qi, j, blk);
        }
    }
    Ok(Split { u, s, vt, discarded_weight })
}

/// Contraction over the shared bond; components concatenate physical legs.
pub fn merge(a: &BlockTensor, b: &BlockTensor) -> BlockTensor {
    let nb = b.nsites;
    let mut out = BlockTensor::zeros(a.nsites + nb, a.left(), b.right());
    for (ca, ma) in a.comps.iter().enumerate() {
        for (cb, mb) in b.comps.iter().enumerate() {
            ma.mul_acc(mb, C64::new(1.0, 0.0), &mut out.comps[(ca << nb) | cb]);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct MpsState {
    sites: Vec<BlockTensor>,
    center: usize,
    filling: usize,
}

impl MpsState {
    /// Product state from site occupations (0 or 1).
    pub fn product_state(occupations: &[u8]) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::InvalidParameter("empty chain".into()));
        }
        let mut q = 0i32;
        let mut sites = Vec::with_capacity(occupations.len());
        for &o in occupations {
            if o > 1 {
                return Err(Error::InvalidParameter(format!("occupation must be 0 or 1, got {o}")));
            }
            let left = Sectors::single(q);
            let right = Sectors::single(q + o as i32);
            let mut t = BlockTensor::zeros(1, &left, &right);
            t.comps[o as usize].insert(0, 0, Mat::from_element(1, 1, C64::new(1.0, 0.0)));
            sites.push(t);
            q += o as i32;
        }
        Ok(Self { sites, center: 0, filling: q as usize })
    }

    /// Assembles a state from site tensors; the tensors must already be in
    /// mixed canonical form around `center`.
    pub fn from_sites(sites: Vec<BlockTensor>, center: usize) -> Result<Self> {
        if sites.is_empty() || center >= sites.len() {
            return Err(Error::InvalidParameter("invalid site list or center".into()));
        }
        if sites[0].left() != &Sectors::single(0) {
            return Err(Error::Shape("left boundary must be the single charge-0 sector".into()));
        }
        for k in 0..sites.len() {
            if sites[k].nsites != 1 {
                return Err(Error::Shape("site tensors must carry one physical leg".into()));
            }
            sites[k].check_charges()?;
            if k + 1 < sites.len() && sites[k].right() != sites[k + 1].left() {
                return Err(Error::Shape(format!("bond {} sectors disagree", k + 1)));
            }
        }
        let last = sites.last().unwrap().right();
        if last.len() != 1 || last.dim(0) != 1 {
            return Err(Error::Shape("right boundary must be a single one-dimensional sector".into()));
        }
        let filling = last.charge(0) as usize;
        Ok(Self { sites, center, filling })
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn filling(&self) -> usize {
        self.filling
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn site(&self, k: usize) -> &BlockTensor {
        &self.sites[k]
    }

    pub(crate) fn set_site(&mut self, k: usize, t: BlockTensor) {
        self.sites[k] = t;
    }

    pub(crate) fn set_center(&mut self, c: usize) {
        self.center = c;
    }

    /// Sectors of bond `k` (between sites `k-1` and `k`), `0 <= k <= L`.
    pub fn bond_sectors(&self, k: usize) -> &Sectors {
        if k == self.len() {
            self.sites[k - 1].right()
        } else {
            self.sites[k].left()
        }
    }

    /// Total dimension of every bond, including the two trivial boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        (0..=self.len()).map(|k| self.bond_sectors(k).total_dim()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn norm(&self) -> f64 {
        self.sites[self.center].norm_sqr().sqrt()
    }

    /// Rescales the center tensor to unit norm and returns the previous norm.
    pub fn renormalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !n.is_finite() || n < 1e-150 {
            return Err(Error::VanishingNorm { norm: n });
        }
        self.sites[self.center].scale(C64::new(1.0 / n, 0.0));
        Ok(n)
    }

    /// Moves the orthogonality center one site right and returns the split.
    pub fn shift_center_right(&mut self, chi_max: usize, weight_floor: f64) -> Result<Split> {
        let k = self.center;
        if k + 1 >= self.len() {
            return Err(Error::InvalidParameter("center already at the right end".into()));
        }
        let split = svd_split(&self.sites[k], 1, chi_max, weight_floor)?;
        let mut vt = split.vt.clone();
        scale_rows(&mut vt, &split.s);
        self.sites[k + 1] = merge(&vt, &self.sites[k + 1]);
        self.sites[k] = split.u.clone();
        self.center = k + 1;
        Ok(split)
    }

    /// Moves the orthogonality center one site left and returns the split.
    pub fn shift_center_left(&mut self, chi_max: usize, weight_floor: f64) -> Result<Split> {
        let k = self.center;
        if k == 0 {
            return Err(Error::InvalidParameter("center already at the left end".into()));
        }
        let split = svd_split(&self.sites[k], 0, chi_max, weight_floor)?;
        let mut u = split.u.clone();
        scale_cols(&mut u, &split.s);
        self.sites[k - 1] = merge(&self.sites[k - 1], &u);
        self.sites[k] = split.vt.clone();
        self.center = k - 1;
        Ok(split)
    }

    pub fn move_center_to(&mut self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::InvalidParameter(format!("center {k} outside chain")));
        }
        while self.center < k {
            self.shift_center_right(usize::MAX, 0.0)?;
        }
        while self.center > k {
            self.shift_center_left(usize::MAX, 0.0)?;
        }
        Ok(())
    }

    /// Brings an arbitrary chain of tensors into canonical form with the
    /// center at site 0 (right-to-left sweep followed by nothing else).
    pub fn canonicalize(&mut self) -> Result<()> {
        self.center = self.len() - 1;
        self.move_center_to(0)
    }

    /// Schmidt values across bond `cut` (`1 <= cut < L`), normalized.
    pub fn schmidt_values(&mut self, cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.len() {
            return Err(Error::InvalidParameter(format!("cut {cut} must lie in 1..{}", self.len())));
        }
        self.move_center_to(cut - 1)?;
        let split = svd_split(&self.sites[cut - 1], 1, usize::MAX, 0.0)?;
        Ok(normalized_spectrum(&split.spectrum()))
    }

    /// Von Neumann entanglement entropy across bond `cut`, in bits.
    pub fn entanglement_entropy(&mut self, cut: usize) -> Result<f64> {
        Ok(entropy_bits(&self.schmidt_values(cut)?))
    }

    /// Occupation of every site, normalized by the state norm.
    pub fn local_densities(&mut self) -> Result<Vec<f64>> {
        Ok(self.sweep_observables()?.0)
    }

    /// One left-to-right sweep returning densities and the entropy (bits) at
    /// every internal bond. The center ends at the last site.
    pub fn sweep_observables(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.move_center_to(0)?;
        let l = self.len();
        let mut dens = Vec::with_capacity(l);
        let mut ent = Vec::with_capacity(l.saturating_sub(1));
        for k in 0..l {
            let t = &self.sites[k];
            let n1 = t.comps[1].norm_sqr();
            let tot = t.norm_sqr();
            if tot == 0.0 {
                return Err(Error::VanishingNorm { norm: 0.0 });
            }
            dens.push(n1 / tot);
            if k + 1 < l {
                let split = self.shift_center_right(usize::MAX, 0.0)?;
                ent.push(entropy_bits(&normalized_spectrum(&split.spectrum())));
            }
        }
        Ok((dens, ent))
    }

    /// `<psi|O|psi> / <psi|psi>`.
    pub fn expectation(&self, op: &Mpo) -> Result<C64> {
        if op.len() != self.len() {
            return Err(Error::Shape("operator and state lengths differ".into()));
        }
        let mut e: Env = env::left_boundary();
        for (t, w) in self.sites.iter().zip(&op.sites) {
            e = env::left_update(&e, t, t, w);
        }
        let val = e[0].trace();
        let nrm = self.overlap(self)?;
        Ok(val / nrm)
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &MpsState) -> Result<C64> {
        if other.len() != self.len() {
            return Err(Error::Shape("state lengths differ".into()));
        }
        if other.filling != self.filling {
            return Ok(C64::new(0.0, 0.0));
        }
        let id = crate::model::MpoSite {
            left_dim: 1,
            right_dim: 1,
            terms: (0..2u8)
                .map(|s| crate::model::MpoTerm { a: 0, b: 0, s_out: s, s_in: s, coeff: C64::new(1.0, 0.0) })
                .collect(),
        };
        let mut e: Env = env::left_boundary();
        for (a, b) in self.sites.iter().zip(&other.sites) {
            e = env::left_update(&e, a, b, &id);
        }
        Ok(e[0].trace())
    }

    /// Largest deviation from the isometry conditions of the canonical form.
    pub fn isometry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, t) in self.sites.iter().enumerate() {
            if k == self.center {
                continue;
            }
            let g = if k < self.center {
                let mut g = BlockMat::zeros(t.right().clone(), t.right().clone());
                for c in &t.comps {
                    c.adjoint().mul_acc(c, C64::new(1.0, 0.0), &mut g);
                }
                g
            } else {
                let mut g = BlockMat::zeros(t.left().clone(), t.left().clone());
                for c in &t.comps {
                    c.mul_acc(&c.adjoint(), C64::new(1.0, 0.0), &mut g);
                }
                g
            };
            let d = g.to_dense();
            let id = Mat::identity(d.nrows(), d.ncols());
            worst = worst.max((d - id).camax());
        }
        worst
    }

    /// Dense state vector over the full `2^L` space (site 0 most significant).
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        let l = self.len();
        if l > 20 {
            return Err(Error::InvalidParameter(format!("dense conversion limited to 20 sites, got {l}")));
        }
        let mut p = Mat::from_element(1, 1, C64::new(1.0, 0.0));
        for t in &self.sites {
            let parts: Vec<Mat> = t
                .comps
                .iter()
                .map(|c| {
                    let d = c.to_dense();
                    linalg::matmul(&p, &d)
                })
                .collect();
            let rows = p.nrows();
            let cols = t.right().total_dim();
            let mut next = Mat::zeros(rows * 2, cols);
            for r in 0..rows {
                for (s, part) in parts.iter().enumerate() {
                    next.row_mut(2 * r + s).copy_from(&part.row(r));
                }
            }
            p = next;
        }
        // The final bond has one sector of dimension one.
        Ok(p.column(0).iter().copied().collect())
    }

    /// MPS approximation of a dense fixed-filling vector, normalized, with the
    /// summed discarded weight of all truncations.
    pub fn from_dense(v: &[C64], chi_max: usize) -> Result<(Self, f64)> {
        let dim = v.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Shape(format!("vector length {dim} is not a power of two >= 2")));
        }
        let l = dim.trailing_zeros() as usize;
        let amax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if amax == 0.0 {
            return Err(Error::VanishingNorm { norm: 0.0 });
        }
        let mut filling = None;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > 1e-14 * amax {
                let n = i.count_ones() as usize;
                match filling {
                    None => filling = Some(n),
                    Some(f) if f != n => {
                        return Err(Error::InvalidParameter("vector mixes particle-number sectors".into()))
                    }
                    _ => {}
                }
            }
        }
        let filling = filling.unwrap();
        // Remainder: per left-bond charge, a matrix over the remaining suffix configurations.
        let mut bond = Sectors::single(0);
        let projected: Vec<C64> = v
            .iter()
            .enumerate()
            .map(|(i, &z)| if i.count_ones() as usize == filling { z } else { C64::new(0.0, 0.0) })
            .collect();
        let mut rem: Vec<Mat> = vec![Mat::from_row_slice(1, dim, &projected)];
        let mut sites = Vec::with_capacity(l);
        let mut discarded = 0.0;
        for k in 0..l {
            let m = l - k;
            let half = 1usize << (m - 1);
            let mut rows: BTreeMap<i32, Vec<(usize, usize)>> = BTreeMap::new();
            for i in 0..bond.len() {
                for s in 0..2usize {
                    rows.entry(bond.charge(i) + s as i32).or_default().push((s, i));
                }
            }
            let mut new_pairs = Vec::new();
            let mut new_rem = Vec::new();
            let mut site_blocks: Vec<(i32, Vec<BlockEntry>)> = Vec::new();
            let mut all_s: Vec<(f64, usize)> = Vec::new();
            let mut decs = Vec::new();
            for (&q, rp) in &rows {
                let nrow: usize = rp.iter().map(|&(_, i)| bond.dim(i)).sum();
                let mut mq = Mat::zeros(nrow, half);
                let mut ro = 0;
                let mut offs = Vec::new();
                for &(s, i) in rp {
                    let src = rem[i].columns(s * half, half);
                    mq.view_mut((ro, 0), (bond.dim(i), half)).copy_from(&src);
                    offs.push((s, i, ro));
                    ro += bond.dim(i);
                }
                if mq.camax() == 0.0 {
                    continue;
                }
                let dec = linalg::svd(&mq)?;
                let di = decs.len();
                all_s.extend(dec.s.iter().map(|&x| (x, di)));
                decs.push((q, offs, dec));
            }
            all_s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            let sv: Vec<f64> = all_s.iter().map(|a| a.0).collect();
            let (keep, dw) = linalg::truncation_rank(&sv, if k + 1 == l { usize::MAX } else { chi_max }, 0.0);
            discarded += dw;
            let mut kept = vec![0usize; decs.len()];
            for a in &all_s[..keep] {
                kept[a.1] += 1;
            }
            for ((q, offs, dec), &kq) in decs.iter().zip(&kept) {
                if kq == 0 {
                    continue;
                }
                new_pairs.push((*q, kq));
                let blocks = offs
                    .iter()
                    .map(|&(s, i, ro)| (s, i, dec.u.view((ro, 0), (bond.dim(i), kq)).into_owned()))
                    .collect();
                site_blocks.push((*q, blocks));
                let mut r = dec.vt.rows(0, kq).into_owned();
                for (row, &sv) in dec.s[..kq].iter().enumerate() {
                    r.row_mut(row).scale_mut(sv);
                }
                new_rem.push(r);
            }
            let nb = Sectors::new(new_pairs);
            let mut t = BlockTensor::zeros(1, &bond, &nb);
            for (q, blocks) in site_blocks {
                let qi = nb.find(q).unwrap();
                for (s, i, b) in blocks {
                    t.comps[s].insert(i, qi, b);
                }
            }
            sites.push(t);
            bond = nb;
            rem = new_rem;
        }
        // The remainder is a 1x1 matrix per surviving final sector; fold it into the last site.
        if bond.len() != 1 || bond.charge(0) as usize != filling {
            return Err(Error::Numerical("dense decomposition ended in the wrong charge sector".into()));
        }
        let c = rem[0][(0, 0)];
        let last = sites.last_mut().unwrap();
        last.scale(c);
        let mut mps = Self { sites, center: l - 1, filling };
        mps.renormalize()?;
        Ok((mps, discarded))
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let put_u32 = |w: &mut W, x: u32| w.write_all(&x.to_le_bytes());
        w.write_all(SNAPSHOT_MAGIC)?;
        put_u32(&mut w, SNAPSHOT_VERSION)?;
        put_u32(&mut w, self.len() as u32)?;
        put_u32(&mut w, self.filling as u32)?;
        put_u32(&mut w, self.center as u32)?;
        for k in 0..=self.len() {
            put_u32(&mut w, self.bond_sectors(k).total_dim() as u32)?;
        }
        for k in 0..=self.len() {
            let s = self.bond_sectors(k);
            put_u32(&mut w, s.len() as u32)?;
            for i in 0..s.len() {
                w.write_all(&s.charge(i).to_le_bytes())?;
                put_u32(&mut w, s.dim(i) as u32)?;
            }
        }
        for t in &self.sites {
            for c in &t.comps {
                put_u32(&mut w, c.blocks.len() as u32)?;
                for (&(i, j), b) in &c.blocks {
                    put_u32(&mut w, i as u32)?;
                    put_u32(&mut w, j as u32)?;
                    for z in b.iter() {
                        w.write_all(&z.re.to_le_bytes())?;
                        w.write_all(&z.im.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        fn u32_of<R: Read>(r: &mut R) -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format("not an MPS snapshot".into()));
        }
        let version = u32_of(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let l = u32_of(&mut r)? as usize;
        let filling = u32_of(&mut r)? as usize;
        let center = u32_of(&mut r)? as usize;
        if l == 0 || l > 4096 || center >= l {
            return Err(Error::Format("corrupt snapshot header".into()));
        }
        let mut chis = Vec::with_capacity(l + 1);
        for _ in 0..=l {
            chis.push(u32_of(&mut r)? as usize);
        }
        let mut bonds = Vec::with_capacity(l + 1);
        for &chi in &chis {
            let ns = u32_of(&mut r)? as usize;
            if ns > 4096 {
                return Err(Error::Format("corrupt sector count".into()));
            }
            let mut pairs = Vec::with_capacity(ns);
            for _ in 0..ns {
                let mut b = [0u8; 4];
                r.read_exact(&mut b)?;
                let q = i32::from_le_bytes(b);
                pairs.push((q, u32_of(&mut r)? as usize));
            }
            let s = Sectors::new(pairs);
            if s.total_dim() != chi {
                return Err(Error::Format("bond dimension disagrees with sectors".into()));
            }
            bonds.push(s);
        }
        let mut sites = Vec::with_capacity(l);
        for k in 0..l {
            let mut t = BlockTensor::zeros(1, &bonds[k], &bonds[k + 1]);
            for c in 0..2 {
                let nb = u32_of(&mut r)? as usize;
                for _ in 0..nb {
                    let i = u32_of(&mut r)? as usize;
                    let j = u32_of(&mut r)? as usize;
                    if i >= bonds[k].len() || j >= bonds[k + 1].len() {
                        return Err(Error::Format("block index out of range".into()));
                    }
                    let (rows, cols) = (bonds[k].dim(i), bonds[k + 1].dim(j));
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows * cols {
                        let re = f64_of(&mut r)?;
                        let im = f64_of(&mut r)?;
                        data.push(C64::new(re, im));
                    }
                    t.comps[c].insert(i, j, Mat::from_column_slice(rows, cols, &data));
                }
            }
            t.check_charges().map_err(|e| Error::Format(e.to_string()))?;
            sites.push(t);
        }
        let mps = Self::from_sites(sites, center).map_err(|e| Error::Format(e.to_string()))?;
        if mps.filling != filling {
            return Err(Error::Format("filling disagrees with final sector".into()));
        }
        Ok(mps)
    }
}

/// (physical index, bond sector, block) of one site tensor under construction.
type BlockEntry = (usize, usize, Mat);

pub fn normalized_spectrum(s: &[f64]) -> Vec<f64> {
    let tot: f64 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    if tot == 0.0 {
        return s.to_vec();
    }
    s.iter().map(|x| x / tot).collect()
}

/// Entropy in bits of normalized Schmidt values; values below 1e-12 are ignored.
pub fn entropy_bits(s: &[f64]) -> f64 {
    s.iter()
        .filter(|&&x| x >= 1e-12)
        .map(|&x| {
            let p = x * x;
            -p * p.log2()
        })
        .sum()
}
