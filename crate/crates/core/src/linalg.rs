//! Singular value decomposition and the Moore-Penrose pseudo-inverse.
//!
//! The decomposition is a one-sided Jacobi iteration: accurate for the small
//! dense matrices that appear here (memory matrices and per-chunk inner
//! systems are at most a few hundred rows).

use crate::error::{CoreError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Relative cutoff under which singular values are treated as zero.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-10;

const MAX_SWEEPS: usize = 60;

/// Thin SVD `M = U * diag(s) * V^T` with singular values sorted descending.
pub struct Svd<T> {
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    pub v: DenseMatrix<T>,
}

/// One-sided Jacobi SVD. Columns of zero norm yield zero singular values and
/// zero `U` columns; callers must skip those when inverting.
pub fn svd<T: Scalar>(m: &DenseMatrix<T>) -> Svd<T> {
    let (r, c) = (m.rows(), m.cols());
    if r < c {
        // svd(M^T) = (V, s, U)
        let t = svd(&m.transpose());
        return Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }

    // Work on A^T so each column of A is a contiguous row.
    let mut at = m.transpose();
    let mut vt = DenseMatrix::<T>::identity(c);
    let tol = T::from_f64_lossy(1e-14);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c.saturating_sub(1) {
            for q in (p + 1)..c {
                let (alpha, beta, gamma) = {
                    let rp = at.row(p);
                    let rq = at.row(q);
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for (&a, &b) in rp.iter().zip(rq.iter()) {
                        alpha += a * a;
                        beta += b * b;
                        gamma += a * b;
                    }
                    (alpha, beta, gamma)
                };
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = T::one() / (T::one() + t * t).sqrt();
                let sn = cs * t;
                rotate_rows(&mut at, p, q, cs, sn);
                rotate_rows(&mut vt, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; normalized columns form U.
    let mut order: Vec<usize> = (0..c).collect();
    let norms: Vec<T> = (0..c).map(|j| at.row_norm(j)).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));

    let mut u = DenseMatrix::<T>::zeros(r, c);
    let mut v = DenseMatrix::<T>::zeros(c, c);
    let mut singular_values = Vec::with_capacity(c);
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > T::zero() {
            for (i, &a) in at.row(j).iter().enumerate() {
                u.set(i, slot, a / s);
            }
        }
        for (i, &vv) in vt.row(j).iter().enumerate() {
            v.set(i, slot, vv);
        }
    }

    Svd {
        u,
        singular_values,
        v,
    }
}

fn rotate_rows<T: Scalar>(m: &mut DenseMatrix<T>, p: usize, q: usize, cs: T, sn: T) {
    let cols = m.cols();
    let (pi, qi) = (p * cols, q * cols);
    let data = m.data_mut();
    for k in 0..cols {
        let a = data[pi + k];
        let b = data[qi + k];
        data[pi + k] = cs * a - sn * b;
        data[qi + k] = sn * a + cs * b;
    }
}

/// Moore-Penrose pseudo-inverse via SVD, truncating singular values below
/// `SINGULAR_VALUE_CUTOFF * s_max`.
pub fn pinv<T: Scalar>(m: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if !m.is_finite() {
        return Err(CoreError::NonFinite("pinv input".into()));
    }
    let (r, c) = (m.rows(), m.cols());
    let decomp = svd(m);
    let s_max = decomp
        .singular_values
        .first()
        .copied()
        .unwrap_or_else(T::zero);
    if s_max == T::zero() {
        return Ok(DenseMatrix::zeros(c, r));
    }
    let cutoff = T::from_f64_lossy(SINGULAR_VALUE_CUTOFF) * s_max;

    // pinv = V * diag(1/s) * U^T accumulated as rank-one outer products.
    let k = decomp.singular_values.len();
    let mut out = vec![T::zero(); c * r];
    let ut = decomp.u.transpose();
    let vt = decomp.v.transpose();
    for j in 0..k {
        let s = decomp.singular_values[j];
        if s <= cutoff {
            continue;
        }
        let inv = T::one() / s;
        let vrow = vt.row(j);
        let urow = ut.row(j);
        for (i, &vi) in vrow.iter().enumerate() {
            let w = vi * inv;
            let orow = &mut out[i * r..(i + 1) * r];
            for (o, &u) in orow.iter_mut().zip(urow.iter()) {
                *o += w * u;
            }
        }
    }
    Ok(DenseMatrix::from_vec_unchecked(c, r, out))
}
