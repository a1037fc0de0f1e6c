//! Tensor-train kernels shared by the qubit MPS and the grouped MPS.
//!
//! Sites have shape `(left, physical, right)` with arbitrary physical
//! dimension. The two engines drive the same routines here, which is what
//! makes a grouping of single qubits reproduce the plain engine bit for bit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{self, Cut, Tensor};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn site_tensor(l: usize, d: usize, r: usize, data: Vec<C64>) -> Tensor {
    Tensor::new(vec![l, d, r], data).expect("site shape matches data")
}

fn dims(t: &Tensor) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Chain {
    pub(crate) sites: Vec<Tensor>,
    /// Orthogonality center; `None` when no gauge is guaranteed.
    pub(crate) center: Option<usize>,
}

/// Result of a truncated two-site update.
#[derive(Clone, Debug)]
pub(crate) struct TwoSite {
    pub(crate) cut: Cut,
    /// Full spectrum of the updated pair before truncation.
    pub(crate) spectrum: Vec<f64>,
}

impl Chain {
    /// Product state from one local amplitude vector per site.
    pub(crate) fn product(locals: Vec<Vec<C64>>) -> Self {
        let sites: Vec<Tensor> = locals.into_iter().map(|v| site_tensor(1, v.len(), 1, v)).collect();
        // every bond has extent one, so any site can serve as the center
        Self { sites, center: Some(0) }
    }

    pub(crate) fn len(&self) -> usize {
        self.sites.len()
    }

    pub(crate) fn phys_dim(&self, k: usize) -> usize {
        self.sites[k].shape()[1]
    }

    /// Inner bond extents, `len() - 1` of them.
    pub(crate) fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|t| t.shape()[2]).collect()
    }

    /// QR at `k`, pushing `R` into site `k + 1`.
    fn shift_right(&mut self, k: usize) {
        let (l, d, r) = dims(&self.sites[k]);
        let (q, rr) = linalg::qr(self.sites[k].data(), l * d, r);
        let kk = (l * d).min(r);
        self.sites[k] = site_tensor(l, d, kk, q);
        let (_, d2, r2) = dims(&self.sites[k + 1]);
        let next = linalg::matmul(&rr, self.sites[k + 1].data(), kk, r, d2 * r2);
        self.sites[k + 1] = site_tensor(kk, d2, r2, next);
    }

    /// LQ at `k`, pushing `L` into site `k - 1`.
    fn shift_left(&mut self, k: usize) {
        let (l, d, r) = dims(&self.sites[k]);
        let (ll, q) = linalg::lq(self.sites[k].data(), l, d * r);
        let kk = l.min(d * r);
        self.sites[k] = site_tensor(kk, d, r, q);
        let (l0, d0, _) = dims(&self.sites[k - 1]);
        let prev = linalg::matmul(self.sites[k - 1].data(), &ll, l0 * d0, l, kk);
        self.sites[k - 1] = site_tensor(l0, d0, kk, prev);
    }

    pub(crate) fn move_center(&mut self, target: usize) {
        assert!(target < self.len());
        match self.center {
            None => {
                for k in 0..target {
                    self.shift_right(k);
                }
                for k in (target + 1..self.len()).rev() {
                    self.shift_left(k);
                }
            }
            Some(c) if c < target => {
                for k in c..target {
                    self.shift_right(k);
                }
            }
            Some(c) => {
                for k in (target + 1..=c).rev() {
                    self.shift_left(k);
                }
            }
        }
        self.center = Some(target);
    }

    /// Brings the center onto `k` or `k + 1`, moving it as little as possible.
    pub(crate) fn prepare_pair(&mut self, k: usize) {
        match self.center {
            Some(c) if c == k || c == k + 1 => {}
            Some(c) if c > k + 1 => self.move_center(k + 1),
            _ => self.move_center(k),
        }
    }

    /// Applies a `2^m x 2^m` matrix to slots `slots` of a site whose physical
    /// index is `n_slots` qubits wide, slot 0 most significant.
    pub(crate) fn apply_local(&mut self, k: usize, matrix: &[C64], slots: &[usize], n_slots: usize) -> Result<()> {
        let (l, d, r) = dims(&self.sites[k]);
        if d != 1 << n_slots || slots.iter().any(|&s| s >= n_slots) {
            return Err(Error::Dimension(format!("slots {slots:?} on a site of physical dimension {d}")));
        }
        let g = 1usize << slots.len();
        if matrix.len() != g * g {
            return Err(Error::Dimension(format!("{} matrix entries for {} slots", matrix.len(), slots.len())));
        }
        let masks: Vec<usize> = slots.iter().map(|&s| 1 << (n_slots - 1 - s)).collect();
        let offsets: Vec<usize> = (0..g)
            .map(|j| {
                masks.iter().enumerate().filter(|(b, _)| j >> (slots.len() - 1 - b) & 1 == 1).map(|(_, m)| m).sum()
            })
            .collect();
        let all_masks: usize = masks.iter().sum();
        let data = self.sites[k].data_mut();
        let mut gathered = vec![ZERO; g];
        for li in 0..l {
            for p0 in (0..d).filter(|p| p & all_masks == 0) {
                for ri in 0..r {
                    for (j, off) in offsets.iter().enumerate() {
                        gathered[j] = data[(li * d + p0 + off) * r + ri];
                    }
                    for (row, off) in offsets.iter().enumerate() {
                        let mut acc = ZERO;
                        for (col, z) in gathered.iter().enumerate() {
                            acc += matrix[row * g + col] * z;
                        }
                        data[(li * d + p0 + off) * r + ri] = acc;
                    }
                }
            }
        }
        Ok(())
    }

    /// Reorders the physical slots of site `k`: new slot `j` is old slot
    /// `perm[j]`.
    pub(crate) fn permute_slots(&mut self, k: usize, perm: &[usize]) {
        if perm.iter().enumerate().all(|(j, &p)| j == p) {
            return;
        }
        let (l, d, r) = dims(&self.sites[k]);
        let n = perm.len();
        debug_assert_eq!(d, 1 << n);
        let mut shape = vec![l];
        shape.extend(std::iter::repeat_n(2, n));
        shape.push(r);
        let mut axes = vec![0];
        axes.extend(perm.iter().map(|&p| p + 1));
        axes.push(n + 1);
        let t = self.sites[k].clone().reshape(shape).expect("slot reshape");
        let permuted = t.permute(&axes).expect("valid slot permutation");
        self.sites[k] = permuted.reshape(vec![l, d, r]).expect("slot reshape");
    }

    /// Applies a two-qubit gate to sites `k` and `k + 1`, both of physical
    /// dimension two, truncating the new bond to `chi`. The center ends on
    /// `k + 1`.
    pub(crate) fn apply_pair(&mut self, k: usize, u: &[C64], chi: usize) -> Result<TwoSite> {
        self.prepare_pair(k);
        let (x, y, out) = two_site_update(&self.sites[k], &self.sites[k + 1], u, chi)?;
        self.sites[k] = x;
        self.sites[k + 1] = y;
        self.center = Some(k + 1);
        Ok(out)
    }

    /// Splits site `k` into physical dimensions `d_left` x `d / d_left` by a
    /// truncated SVD. The center must be on `k`; it ends on `k + 1`.
    pub(crate) fn split(&mut self, k: usize, d_left: usize, chi: usize) -> Result<TwoSite> {
        self.move_center(k);
        let (l, d, r) = dims(&self.sites[k]);
        let d_right = d / d_left;
        let t = self.sites[k].clone().reshape(vec![l, d_left, d_right, r])?;
        let (x, y, out) = truncated_split(&t, chi)?;
        self.sites[k] = x;
        self.sites.insert(k + 1, y);
        self.center = Some(k + 1);
        Ok(out)
    }

    /// Contracts sites `k` and `k + 1` into one site. Exact.
    pub(crate) fn merge(&mut self, k: usize) {
        let (l, d1, m) = dims(&self.sites[k]);
        let (_, d2, r) = dims(&self.sites[k + 1]);
        let data = linalg::matmul(self.sites[k].data(), self.sites[k + 1].data(), l * d1, m, d2 * r);
        self.sites[k] = site_tensor(l, d1 * d2, r, data);
        self.sites.remove(k + 1);
        self.center = self.center.map(|c| if c > k { c - 1 } else { c });
    }

    /// `<index_0 index_1 ... | psi>` with one physical index per site.
    pub(crate) fn amplitude(&self, indices: &[usize]) -> C64 {
        let mut v = vec![ONE];
        for (t, &i) in self.sites.iter().zip(indices) {
            let (l, d, r) = dims(t);
            let data = t.data();
            let mut next = vec![ZERO; r];
            for (a, va) in v.iter().enumerate().take(l) {
                let row = &data[(a * d + i) * r..(a * d + i + 1) * r];
                for (n, z) in next.iter_mut().zip(row) {
                    *n += va * z;
                }
            }
            v = next;
        }
        v[0]
    }

    /// `<self|other>`; the chains must share physical dimensions.
    pub(crate) fn overlap(&self, other: &Chain) -> Result<C64> {
        if self.len() != other.len() || (0..self.len()).any(|k| self.phys_dim(k) != other.phys_dim(k)) {
            return Err(Error::Dimension("overlap of differently shaped chains".into()));
        }
        let mut env = vec![ONE];
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let (la, d, ra) = dims(a);
            let (lb, _, rb) = dims(b);
            let half = linalg::matmul(&env, b.data(), la, lb, d * rb);
            env = linalg::matmul_adj_left(a.data(), &half, la * d, ra, rb);
        }
        Ok(env[0])
    }

    pub(crate) fn norm_sqr(&self) -> f64 {
        match self.center {
            Some(c) => self.sites[c].norm_sqr(),
            None => self.overlap(self).map(|z| z.re).unwrap_or(f64::NAN),
        }
    }

    /// Full contraction; the physical index of site 0 varies slowest.
    pub(crate) fn to_dense(&self) -> Vec<C64> {
        let mut acc = vec![ONE];
        let mut rows = 1;
        for t in &self.sites {
            let (l, d, r) = dims(t);
            acc = linalg::matmul(&acc, t.data(), rows, l, d * r);
            rows *= d;
        }
        acc
    }

    /// Draws one configuration by sequential conditional sampling. Moves the
    /// center to site 0.
    pub(crate) fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        self.move_center(0);
        let mut env = vec![ONE];
        let mut out = Vec::with_capacity(self.len());
        for t in &self.sites {
            let (l, d, r) = dims(t);
            let data = t.data();
            let branches: Vec<Vec<C64>> = (0..d)
                .map(|i| {
                    let mut w = vec![ZERO; r];
                    for (a, ea) in env.iter().enumerate().take(l) {
                        let row = &data[(a * d + i) * r..(a * d + i + 1) * r];
                        for (n, z) in w.iter_mut().zip(row) {
                            *n += ea * z;
                        }
                    }
                    w
                })
                .collect();
            let weights: Vec<f64> = branches.iter().map(|w| w.iter().map(|z| z.norm_sqr()).sum()).collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = d - 1;
            for (i, &w) in weights.iter().enumerate() {
                if u < w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            let scale = 1.0 / weights[pick].sqrt();
            env = branches[pick].iter().map(|z| z * scale).collect();
            out.push(pick);
        }
        out
    }

    /// Schmidt values across the bond between sites `cut - 1` and `cut`.
    pub(crate) fn spectrum(&mut self, cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.len() {
            return Err(Error::OutOfRange { what: "cut", index: cut, size: self.len() });
        }
        self.move_center(cut - 1);
        let (l, d, r) = dims(&self.sites[cut - 1]);
        let mut s = linalg::singular_values(self.sites[cut - 1].data(), l * d, r)?;
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    /// Largest deviation from the left/right orthonormality conditions implied
    /// by the current center. Zero when no center is tracked.
    pub(crate) fn orthogonality_error(&self) -> f64 {
        let Some(c) = self.center else { return 0.0 };
        let mut worst = 0.0f64;
        for (k, t) in self.sites.iter().enumerate() {
            let (l, d, r) = dims(t);
            let gram = if k < c {
                linalg::matmul_adj_left(t.data(), t.data(), l * d, r, r)
            } else if k > c {
                let adj = linalg::adjoint(t.data(), l, d * r);
                linalg::matmul(t.data(), &adj, l, d * r, l)
            } else {
                continue;
            };
            let n = if k < c { r } else { l };
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { ONE } else { ZERO };
                    worst = worst.max((gram[i * n + j] - target).norm());
                }
            }
        }
        worst
    }
}

/// Contracts `a (l,2,m)` with `b (m,2,r)`, applies the 4x4 gate `u` to the
/// two physical indices, and splits back with the new bond truncated to `chi`.
/// The kept singular values are renormalized and absorbed into the right
/// tensor.
pub(crate) fn two_site_update(a: &Tensor, b: &Tensor, u: &[C64], chi: usize) -> Result<(Tensor, Tensor, TwoSite)> {
    let (l, da, m) = dims(a);
    let (mb, db, r) = dims(b);
    if da != 2 || db != 2 || m != mb || u.len() != 16 {
        return Err(Error::Dimension(format!("two-site update on {:?} and {:?}", a.shape(), b.shape())));
    }
    let theta = linalg::matmul(a.data(), b.data(), l * 2, m, 2 * r);
    let mut gated = vec![ZERO; theta.len()];
    // per left index, the (ij, r) block is a 4 x r matrix
    for li in 0..l {
        let block = &theta[li * 4 * r..(li + 1) * 4 * r];
        let out = &mut gated[li * 4 * r..(li + 1) * 4 * r];
        for row in 0..4 {
            for col in 0..4 {
                let w = u[row * 4 + col];
                if w == ZERO {
                    continue;
                }
                let src = &block[col * r..(col + 1) * r];
                for (o, s) in out[row * r..(row + 1) * r].iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
    }
    let t = Tensor::new(vec![l, 2, 2, r], gated)?;
    truncated_split(&t, chi)
}

/// SVD of a `(l, d1, d2, r)` tensor as `(l d1) x (d2 r)`, truncated to `chi`,
/// kept spectrum renormalized and absorbed to the right.
fn truncated_split(t: &Tensor, chi: usize) -> Result<(Tensor, Tensor, TwoSite)> {
    let (l, d1, d2, r) = (t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]);
    let full = tensor::svd(t, &[0, 1])?;
    let spectrum = full.s.clone();
    let cut = tensor::cut_spectrum(&spectrum, chi);
    let (kept, _) = tensor::truncate(full, chi);
    let keep = cut.keep;
    let norm = cut.kept_weight.sqrt();
    let mut v = kept.v.into_data();
    let cols = d2 * r;
    for (row, &s) in v.chunks_mut(cols).zip(&kept.s) {
        let w = s / norm;
        for z in row {
            *z *= w;
        }
    }
    let x = site_tensor(l, d1, keep, kept.u.into_data());
    let y = site_tensor(keep, d2, r, v);
    Ok((x, y, TwoSite { cut, spectrum }))
}
