//! Dense complex kernels on row-major buffers, backed by faer.
//!
//! Every routine takes and returns row-major data so callers never deal with
//! faer's column-major storage. All kernels run sequentially; parallelism in
//! this crate lives at the level of independent simulations.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::qr::no_pivoting::factor as qr_factor;
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::{Accum, Conj, Mat, MatMut, MatRef, Par};

use crate::error::{Error, Result};
use crate::C64;

fn view(data: &[C64], rows: usize, cols: usize) -> MatRef<'_, C64> {
    MatRef::from_row_major_slice(data, rows, cols)
}

fn to_row_major(m: MatRef<'_, C64>) -> Vec<C64> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Thin SVD `A = U diag(S) Vh` of a row-major `rows x cols` matrix.
///
/// Returns `U` (`rows x k`), `S` (length `k`, non-increasing) and `Vh`
/// (`k x cols`), all row-major, with `k = min(rows, cols)`.
pub(crate) fn svd(data: &[C64], rows: usize, cols: usize) -> Result<(Vec<C64>, Vec<f64>, Vec<C64>)> {
    let k = rows.min(cols);
    let mut u = Mat::<C64>::zeros(rows, k);
    let mut v = Mat::<C64>::zeros(cols, k);
    let mut s = faer::diag::Diag::<C64>::zeros(k);
    let par = Par::Seq;
    let scratch = faer_svd::svd_scratch::<C64>(
        rows,
        cols,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        par,
        Default::default(),
    );
    faer_svd::svd(
        view(data, rows, cols),
        s.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::Numeric { shape: vec![rows, cols] })?;

    let s: Vec<f64> = s.column_vector().iter().map(|x| x.re).collect();
    let mut vh = Vec::with_capacity(k * cols);
    for i in 0..k {
        for j in 0..cols {
            vh.push(v[(j, i)].conj());
        }
    }
    Ok((to_row_major(u.as_ref()), s, vh))
}

/// Singular values only, non-increasing.
pub(crate) fn singular_values(data: &[C64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let k = rows.min(cols);
    let mut s = faer::diag::Diag::<C64>::zeros(k);
    let par = Par::Seq;
    let scratch = faer_svd::svd_scratch::<C64>(
        rows,
        cols,
        ComputeSvdVectors::No,
        ComputeSvdVectors::No,
        par,
        Default::default(),
    );
    faer_svd::svd(
        view(data, rows, cols),
        s.as_mut(),
        None,
        None,
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::Numeric { shape: vec![rows, cols] })?;
    Ok(s.column_vector().iter().map(|x| x.re).collect())
}

/// Thin Householder QR of a row-major matrix: `Q` is `rows x k` with
/// orthonormal columns, `R` is `k x cols` upper trapezoidal.
pub(crate) fn qr(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>) {
    let k = rows.min(cols);
    let mut packed = view(data, rows, cols).to_owned();
    let block = qr_factor::recommended_block_size::<C64>(rows, cols);
    let mut coeff = Mat::<C64>::zeros(block, k);
    let par = Par::Seq;
    qr_factor::qr_in_place(
        packed.as_mut(),
        coeff.as_mut(),
        par,
        MemStack::new(&mut MemBuffer::new(qr_factor::qr_in_place_scratch::<C64>(
            rows,
            cols,
            block,
            par,
            Default::default(),
        ))),
        Default::default(),
    );

    let mut r = vec![C64::new(0.0, 0.0); k * cols];
    for i in 0..k {
        for j in i..cols {
            r[i * cols + j] = packed[(i, j)];
        }
    }
    let mut q = Mat::<C64>::identity(rows, k);
    householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
        packed.as_ref().get(.., ..k),
        coeff.as_ref(),
        Conj::No,
        q.as_mut(),
        par,
        MemStack::new(&mut MemBuffer::new(
            householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<C64>(rows, block, k),
        )),
    );
    (to_row_major(q.as_ref()), r)
}

/// `A = L Q` with `Q` (`k x cols`) having orthonormal rows.
pub(crate) fn lq(data: &[C64], rows: usize, cols: usize) -> (Vec<C64>, Vec<C64>) {
    let adj = adjoint(data, rows, cols);
    let (q, r) = qr(&adj, cols, rows);
    let k = rows.min(cols);
    (adjoint(&r, k, rows), adjoint(&q, cols, k))
}

/// Conjugate transpose of a row-major `rows x cols` matrix.
pub(crate) fn adjoint(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out.push(data[i * cols + j].conj());
        }
    }
    out
}

/// `C = A B` for row-major `A` (`m x k`) and `B` (`k x n`).
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); m * n];
    if m * n == 0 {
        return c;
    }
    if k == 0 {
        return c;
    }
    faer::linalg::matmul::matmul(
        MatMut::from_row_major_slice_mut(&mut c, m, n),
        Accum::Replace,
        view(a, m, k),
        view(b, k, n),
        C64::new(1.0, 0.0),
        Par::Seq,
    );
    c
}

/// `C = A^H B` for row-major `A` (`k x m`) and `B` (`k x n`).
pub(crate) fn matmul_adj_left(a: &[C64], b: &[C64], k: usize, m: usize, n: usize) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); m * n];
    if m * n == 0 || k == 0 {
        return c;
    }
    faer::linalg::matmul::matmul(
        MatMut::from_row_major_slice_mut(&mut c, m, n),
        Accum::Replace,
        view(a, k, m).adjoint(),
        view(b, k, n),
        C64::new(1.0, 0.0),
        Par::Seq,
    );
    c
}

/// Eigen-decomposition of a Hermitian row-major matrix. Eigenvalues come back
/// non-decreasing; column `k` of the returned row-major matrix is the
/// eigenvector for eigenvalue `k`.
pub(crate) fn hermitian_eigen(data: &[C64], dim: usize) -> Result<(Vec<f64>, Vec<C64>)> {
    let mut u = Mat::<C64>::zeros(dim, dim);
    let mut s = faer::diag::Diag::<C64>::zeros(dim);
    let par = Par::Seq;
    let scratch = faer::linalg::evd::self_adjoint_evd_scratch::<C64>(
        dim,
        faer::linalg::evd::ComputeEigenvectors::Yes,
        par,
        Default::default(),
    );
    faer::linalg::evd::self_adjoint_evd(
        view(data, dim, dim),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::Numeric { shape: vec![dim, dim] })?;
    Ok((s.column_vector().iter().map(|x| x.re).collect(), to_row_major(u.as_ref())))
}

/// Max-entry deviation of `U^H U` from the identity for a square matrix.
pub(crate) fn unitarity_deviation(u: &[C64], dim: usize) -> f64 {
    let prod = matmul_adj_left(u, u, dim, dim, dim);
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[i * dim + j] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}
