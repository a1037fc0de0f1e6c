//! Dense complex tensors.
//!
//! Data is stored row-major over the declared index order: the last index
//! varies fastest. Every matricization in this crate (SVD, QR, contraction)
//! is defined relative to that layout, so identical inputs always produce
//! bit-identical factorization inputs.

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Relative threshold below which a singular value counts as an exact zero.
pub const ZERO_SINGULAR_VALUE: f64 = 1e-14;

/// Role of a tensor index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexRole {
    Physical,
    Bond,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<C64>,
    roles: Option<Vec<IndexRole>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero extent in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data, roles: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero extent in shape {shape:?}");
        let len = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); len], roles: None }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; t.shape.len()];
        for slot in t.data.iter_mut() {
            *slot = f(&idx);
            increment(&mut idx, &t.shape);
        }
        t
    }

    pub fn with_roles(mut self, roles: Vec<IndexRole>) -> Result<Self> {
        if roles.len() != self.shape.len() {
            return Err(Error::Dimension(format!(
                "{} roles for a rank-{} tensor",
                roles.len(),
                self.shape.len()
            )));
        }
        self.roles = Some(roles);
        Ok(self)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn roles(&self) -> Option<&[IndexRole]> {
        self.roles.as_deref()
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

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (&i, &d)| {
            debug_assert!(i < d);
            acc * d + i
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.contains(&0) {
            return Err(Error::Dimension(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        self.roles = None;
        Ok(self)
    }

    /// Reorders indices: axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        check_permutation(axes, self.rank())?;
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let strides = strides(&self.shape);
        let new_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let src_strides: Vec<usize> = axes.iter().map(|&a| strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; axes.len()];
        let mut offset = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            // odometer step, tracking the source offset incrementally
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                offset += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                offset -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        let roles = self.roles.as_ref().map(|r| axes.iter().map(|&a| r[a]).collect());
        Ok(Self { shape: new_shape, data, roles })
    }

    /// Matricizes over `left` x (remaining indices in original order).
    /// Returns the permuted tensor together with the row and column extents.
    fn matricize(&self, left: &[usize]) -> Result<(Tensor, usize, usize, Vec<usize>)> {
        let rank = self.rank();
        if left.is_empty() || left.len() >= rank {
            return Err(Error::Dimension(format!(
                "left index set {left:?} must be a nonempty proper subset of {rank} indices"
            )));
        }
        let mut seen = vec![false; rank];
        for &a in left {
            if a >= rank || seen[a] {
                return Err(Error::Dimension(format!("bad left index set {left:?}")));
            }
            seen[a] = true;
        }
        let right: Vec<usize> = (0..rank).filter(|a| !seen[*a]).collect();
        let order: Vec<usize> = left.iter().chain(&right).copied().collect();
        let permuted = self.permute(&order)?;
        let rows: usize = left.iter().map(|&a| self.shape[a]).product();
        let cols: usize = right.iter().map(|&a| self.shape[a]).product();
        Ok((permuted, rows, cols, right))
    }
}

fn increment(idx: &mut [usize], shape: &[usize]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < shape[k] {
            return;
        }
        idx[k] = 0;
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn check_permutation(axes: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if axes.len() != rank {
        return Err(Error::Dimension(format!("permutation {axes:?} for rank {rank}")));
    }
    for &a in axes {
        if a >= rank || seen[a] {
            return Err(Error::Dimension(format!("invalid permutation {axes:?}")));
        }
        seen[a] = true;
    }
    Ok(())
}

/// Contracts `a` and `b` over the given `(axis of a, axis of b)` pairs.
///
/// The result carries the unpaired indices of `a` followed by the unpaired
/// indices of `b`, each group in its original order.
pub fn contract(a: &Tensor, b: &Tensor, pairs: &[(usize, usize)]) -> Result<Tensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() || used_a[ia] || used_b[ib] {
            return Err(Error::Dimension(format!("invalid contraction pair ({ia}, {ib})")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Dimension(format!(
                "paired extents differ: a[{ia}] = {}, b[{ib}] = {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&k| !used_b[k]).collect();

    let order_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let order_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let pa = a.permute(&order_a)?;
    let pb = b.permute(&order_b)?;

    let m: usize = free_a.iter().map(|&k| a.shape[k]).product();
    let k: usize = pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let data = linalg::matmul(&pa.data, &pb.data, m, k, n);

    let shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape[i])
        .chain(free_b.iter().map(|&j| b.shape[j]))
        .collect();
    let roles = match (&a.roles, &b.roles) {
        (Some(ra), Some(rb)) => Some(free_a.iter().map(|&i| ra[i]).chain(free_b.iter().map(|&j| rb[j])).collect()),
        _ => None,
    };
    Ok(Tensor { shape, data, roles })
}

/// Result of a (possibly truncated) singular value decomposition.
///
/// `u` carries the left indices followed by the new bond; `v` carries the new
/// bond followed by the remaining indices.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Tensor,
    pub s: Vec<f64>,
    pub v: Tensor,
    pub discarded_weight: f64,
}

impl SvdResult {
    /// Contracts `u · diag(s) · v` back into a tensor over (left, right) indices.
    pub fn reconstruct(&self) -> Tensor {
        let mut us = self.u.clone();
        let k = self.s.len();
        for row in us.data.chunks_mut(k) {
            for (z, &s) in row.iter_mut().zip(&self.s) {
                *z *= s;
            }
        }
        let last = self.u.rank() - 1;
        contract(&us, &self.v, &[(last, 0)]).expect("bond extents agree")
    }
}

/// Full-rank thin SVD of `t` matricized as `left` x rest.
pub fn svd(t: &Tensor, left: &[usize]) -> Result<SvdResult> {
    let (perm, rows, cols, right) = t.matricize(left)?;
    let (mut u, mut s, mut vh) = linalg::svd(&perm.data, rows, cols).map_err(|_| Error::Numeric { shape: t.shape.clone() })?;
    let k = s.len();
    stable_sort_descending(&mut s, &mut u, &mut vh, rows, cols);

    let mut u_shape: Vec<usize> = left.iter().map(|&a| t.shape[a]).collect();
    u_shape.push(k);
    let mut v_shape = vec![k];
    v_shape.extend(right.iter().map(|&a| t.shape[a]));
    Ok(SvdResult {
        u: Tensor::new(u_shape, u)?,
        s,
        v: Tensor::new(v_shape, vh)?,
        discarded_weight: 0.0,
    })
}

/// Reorders singular triplets into non-increasing order. Ties keep their
/// original relative order.
fn stable_sort_descending(s: &mut Vec<f64>, u: &mut Vec<C64>, vh: &mut Vec<C64>, rows: usize, cols: usize) {
    if s.windows(2).all(|w| w[0] >= w[1]) {
        return;
    }
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap_or(std::cmp::Ordering::Equal));
    let new_s: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let mut new_u = vec![C64::new(0.0, 0.0); rows * k];
    for r in 0..rows {
        for (c, &src) in order.iter().enumerate() {
            new_u[r * k + c] = u[r * k + src];
        }
    }
    let mut new_vh = Vec::with_capacity(k * cols);
    for &src in &order {
        new_vh.extend_from_slice(&vh[src * cols..(src + 1) * cols]);
    }
    *s = new_s;
    *u = new_u;
    *vh = new_vh;
}

/// Thin QR of `t` matricized as `left` x rest: `q` carries the left indices
/// and the new bond, `r` the new bond and the remaining indices.
pub fn qr(t: &Tensor, left: &[usize]) -> Result<(Tensor, Tensor)> {
    let (perm, rows, cols, right) = t.matricize(left)?;
    let (q, r) = linalg::qr(&perm.data, rows, cols);
    let k = rows.min(cols);
    let mut q_shape: Vec<usize> = left.iter().map(|&a| t.shape[a]).collect();
    q_shape.push(k);
    let mut r_shape = vec![k];
    r_shape.extend(right.iter().map(|&a| t.shape[a]));
    Ok((Tensor::new(q_shape, q)?, Tensor::new(r_shape, r)?))
}

/// Outcome of cutting a non-increasing spectrum down to a bond cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    /// Number of singular values kept.
    pub keep: usize,
    /// Number of singular values above the exact-zero threshold.
    pub rank: usize,
    /// Kept squared weight over total squared weight.
    pub fidelity: f64,
    /// Sum of kept squared singular values.
    pub kept_weight: f64,
    /// Sum of all squared singular values.
    pub total_weight: f64,
}

/// Decides how many of the non-increasing values `s` survive a cap of `chi`.
///
/// Values below `ZERO_SINGULAR_VALUE * s[0]` are exact zeros: they are never
/// kept and do not enter the total weight, so a cut that keeps every nonzero
/// value reports a fidelity of exactly 1.
pub fn cut_spectrum(s: &[f64], chi: usize) -> Cut {
    assert!(chi >= 1, "bond cap must be positive");
    let smax = s.first().copied().unwrap_or(0.0);
    let threshold = ZERO_SINGULAR_VALUE * smax;
    let rank = s.iter().take_while(|&&x| x > threshold).count().max(1).min(s.len().max(1));
    let keep = rank.min(chi);
    let mut kept_weight = 0.0;
    let mut total_weight = 0.0;
    for (i, &x) in s.iter().take(rank).enumerate() {
        total_weight += x * x;
        if i + 1 == keep {
            kept_weight = total_weight;
        }
    }
    let fidelity = if total_weight > 0.0 { kept_weight / total_weight } else { 1.0 };
    Cut { keep, rank, fidelity, kept_weight, total_weight }
}

/// Keeps at most `chi` singular values and reports the retained fidelity
/// `sum_{kept} S^2 / sum_{all} S^2`. Kept values are not renormalized.
pub fn truncate(s: SvdResult, chi: usize) -> (SvdResult, f64) {
    let cut = cut_spectrum(&s.s, chi);
    let SvdResult { u, s: values, v, .. } = s;
    let k = values.len();
    let keep = cut.keep.min(k);

    let u_rows = u.len() / k;
    let mut u_data = Vec::with_capacity(u_rows * keep);
    for row in u.data.chunks(k) {
        u_data.extend_from_slice(&row[..keep]);
    }
    let mut u_shape = u.shape.clone();
    *u_shape.last_mut().expect("u has a bond index") = keep;

    let v_cols = v.len() / k;
    let v_data = v.data[..keep * v_cols].to_vec();
    let mut v_shape = v.shape.clone();
    v_shape[0] = keep;

    let fidelity = cut.fidelity;
    (
        SvdResult {
            u: Tensor { shape: u_shape, data: u_data, roles: u.roles },
            s: values[..keep].to_vec(),
            v: Tensor { shape: v_shape, data: v_data, roles: v.roles },
            discarded_weight: 1.0 - fidelity,
        },
        fidelity,
    )
}
