//! Memory-driven iterative updates of the attribute prototype matrix.
//!
//! A `d x d` memory matrix `P` carries everything needed to fold new labeled
//! feature batches into the prototype matrix `W` by recursive least squares,
//! so historical samples never have to be stored. From
//! `P0 = (X0^T X0)^+`, each batch `(X, Z)` applies
//!
//! ```text
//! v  = P X^T (I + X P X^T)^+
//! P' = P - v X P
//! W' = W + P' X^T (Z - X W)
//! ```
//!
//! The inner inverse is a pseudo-inverse so degenerate batches cannot blow
//! up the recursion.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::pinv;
use crate::Matrix;

/// Upper bound on rows folded in at once; larger updates are split so the
/// inner `n x n` system stays small. The recursion is exact under chunking
/// on full-rank data.
pub const RLS_CHUNK_ROWS: usize = 256;

/// Recursive pseudo-inverse state. Square, symmetric, never grows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemoryMatrix {
    p: Matrix,
}

impl MemoryMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }
}

/// Initializes the memory matrix from extracted features: `P0 = (X^T X)^+`.
pub fn init_memory(x_fe: &Matrix) -> Result<MemoryMatrix> {
    if x_fe.rows() == 0 {
        return Err(CoreError::InvalidInput(
            "memory initialization needs at least one feature row".into(),
        ));
    }
    let xtx = x_fe.transpose().matmul(x_fe);
    let p = pinv(&xtx)?;
    Ok(MemoryMatrix { p })
}

/// Folds a labeled feature batch into `(P, W)` in place.
pub fn rls_update(
    memory: &mut MemoryMatrix,
    w: &mut Matrix,
    x_fe: &Matrix,
    z: &Matrix,
) -> Result<()> {
    if x_fe.rows() == 0 {
        return Err(CoreError::InvalidInput("empty update batch".into()));
    }
    if x_fe.rows() != z.rows() {
        return Err(CoreError::ShapeMismatch(format!(
            "feature rows {} vs label rows {}",
            x_fe.rows(),
            z.rows()
        )));
    }
    if x_fe.cols() != memory.dim() || w.rows() != memory.dim() {
        return Err(CoreError::ShapeMismatch(format!(
            "feature width {} / prototype rows {} vs memory dim {}",
            x_fe.cols(),
            w.rows(),
            memory.dim()
        )));
    }
    if z.cols() != w.cols() {
        // Never pad: a attribute-width mismatch is a protocol bug upstream.
        return Err(CoreError::ShapeMismatch(format!(
            "label width {} does not match prototype width {}",
            z.cols(),
            w.cols()
        )));
    }

    let mut start = 0;
    while start < x_fe.rows() {
        let end = (start + RLS_CHUNK_ROWS).min(x_fe.rows());
        let xc = x_fe.slice_rows(start, end);
        let zc = z.slice_rows(start, end);
        rls_update_chunk(memory, w, &xc, &zc)?;
        start = end;
    }
    Ok(())
}

fn rls_update_chunk(
    memory: &mut MemoryMatrix,
    w: &mut Matrix,
    x: &Matrix,
    z: &Matrix,
) -> Result<()> {
    let xt = x.transpose();
    let px_t = memory.p.matmul(&xt);
    let inner = Matrix::identity(x.rows()).add(&x.matmul(&px_t));
    let gain = px_t.matmul(&pinv(&inner)?);
    let p_new = memory.p.sub(&gain.matmul(&x.matmul(&memory.p)));
    let residual = z.sub(&x.matmul(w));
    let w_new = w.add(&p_new.matmul(&xt).matmul(&residual));
    p_new.ensure_finite("memory matrix update")?;
    w_new.ensure_finite("prototype matrix update")?;
    memory.p = p_new;
    *w = w_new;
    Ok(())
}
