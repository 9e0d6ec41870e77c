//! Softmax negative log-likelihood losses, plain and taped.
//!
//! The grouped variant applies an independent softmax per attribute group and
//! sums the per-group mean NLL over groups.

use crate::attributes::AttributeSchema;
use crate::error::{CoreError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::tape::{GradTape, Var};

/// Mean-over-batch NLL of `softmax(logits)` against one-hot `targets`,
/// treating the whole width as a single group.
pub fn softmax_nll<T: Scalar>(
    logits: &DenseMatrix<T>,
    targets: &DenseMatrix<T>,
) -> Result<T> {
    check_shapes(logits, targets)?;
    let n = logits.rows();
    let mut total = T::zero();
    for i in 0..n {
        total += row_nll(logits.row(i), targets.row(i));
    }
    Ok(total / T::from_usize_lossy(n))
}

/// Sum over attribute groups of the mean-over-batch NLL after per-group
/// softmax.
pub fn grouped_softmax_nll<T: Scalar>(
    logits: &DenseMatrix<T>,
    targets: &DenseMatrix<T>,
    schema: &AttributeSchema,
) -> Result<T> {
    check_shapes(logits, targets)?;
    if logits.cols() != schema.coded_width() {
        return Err(CoreError::SchemaMismatch(format!(
            "logit width {} does not match schema coded width {}",
            logits.cols(),
            schema.coded_width()
        )));
    }
    let n = logits.rows();
    let mut total = T::zero();
    for (offset, width) in schema.groups() {
        let mut group_sum = T::zero();
        for i in 0..n {
            group_sum += row_nll(
                &logits.row(i)[offset..offset + width],
                &targets.row(i)[offset..offset + width],
            );
        }
        total += group_sum / T::from_usize_lossy(n);
    }
    Ok(total)
}

fn check_shapes<T: Scalar>(logits: &DenseMatrix<T>, targets: &DenseMatrix<T>) -> Result<()> {
    if logits.rows() == 0 {
        return Err(CoreError::InvalidInput("empty batch".into()));
    }
    if (logits.rows(), logits.cols()) != (targets.rows(), targets.cols()) {
        return Err(CoreError::ShapeMismatch(format!(
            "logits {}x{} vs targets {}x{}",
            logits.rows(),
            logits.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    Ok(())
}

/// `-log softmax(logits)[target]` with a max-shifted log-sum-exp.
fn row_nll<T: Scalar>(logits: &[T], targets: &[T]) -> T {
    let max = logits
        .iter()
        .fold(T::neg_infinity(), |acc, &v| acc.max(v));
    let lse = max
        + logits
            .iter()
            .map(|&v| (v - max).exp())
            .sum::<T>()
            .ln();
    let picked: T = logits
        .iter()
        .zip(targets.iter())
        .map(|(&l, &t)| l * t)
        .sum();
    lse - picked
}

/// Taped single-group softmax NLL (mean over batch).
pub fn tape_softmax_nll<T: Scalar>(tape: &mut GradTape<T>, logits: Var, targets: Var) -> Var {
    let n = tape.value(logits).rows();
    group_nll_on_tape(tape, logits, targets, n)
}

/// Taped grouped softmax NLL: per-group softmax, mean over batch, summed
/// over groups. Gradients flow into `logits` only.
pub fn tape_grouped_softmax_nll<T: Scalar>(
    tape: &mut GradTape<T>,
    logits: Var,
    targets: Var,
    schema: &AttributeSchema,
) -> Var {
    let n = tape.value(logits).rows();
    assert_eq!(
        tape.value(logits).cols(),
        schema.coded_width(),
        "logit width vs schema"
    );
    let mut total: Option<Var> = None;
    for (offset, width) in schema.groups() {
        let lg = tape.slice_cols(logits, offset, offset + width);
        let tg = tape.slice_cols(targets, offset, offset + width);
        let g = group_nll_on_tape(tape, lg, tg, n);
        total = Some(match total {
            Some(t) => tape.add(t, g),
            None => g,
        });
    }
    total.expect("schema has at least one group")
}

fn group_nll_on_tape<T: Scalar>(
    tape: &mut GradTape<T>,
    logits: Var,
    targets: Var,
    batch: usize,
) -> Var {
    // Row maxima enter as constants: the shift is exact for the value and
    // transparent to the gradient.
    let maxes = {
        let v = tape.value(logits);
        let data: Vec<T> = (0..v.rows())
            .map(|i| v.row(i).iter().fold(T::neg_infinity(), |a, &x| a.max(x)))
            .collect();
        DenseMatrix::from_vec_unchecked(v.rows(), 1, data)
    };
    let maxes = tape.constant(maxes);
    let shifted = tape.sub_col(logits, maxes);
    let ex = tape.exp(shifted);
    let sums = tape.sum_cols(ex);
    let lse = tape.ln(sums);
    let logp = tape.sub_col(shifted, lse);
    let picked = tape.mul(targets, logp);
    let s = tape.sum_all(picked);
    tape.scale(s, -T::one() / T::from_usize_lossy(batch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn uniform_logits_give_ln_of_width() {
        let schema = AttributeSchema::new(&[4]).unwrap();
        let logits = M::zeros(1, 4);
        let targets = M::from_vec(1, 4, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let loss = grouped_softmax_nll(&logits, &targets, &schema).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn two_class_hand_case() {
        // softmax(0, ln 3) = (1/4, 3/4); NLL of class 2 = -ln(3/4)
        let schema = AttributeSchema::new(&[2]).unwrap();
        let logits = M::from_vec(1, 2, vec![0.0, 3.0f64.ln()]).unwrap();
        let targets = M::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let loss = grouped_softmax_nll(&logits, &targets, &schema).unwrap();
        assert!((loss - 0.287682).abs() < 1e-6);
    }

    #[test]
    fn saturated_logits_give_near_zero_loss() {
        let schema = AttributeSchema::new(&[3]).unwrap();
        let logits = M::from_vec(1, 3, vec![30.0, 0.0, 0.0]).unwrap();
        let targets = M::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let loss = grouped_softmax_nll(&logits, &targets, &schema).unwrap();
        assert!(loss < 1e-9);
    }

    #[test]
    fn zero_logits_sum_log_cardinalities() {
        let schema = AttributeSchema::new(&[3, 4, 3, 4]).unwrap();
        let logits = M::zeros(2, 14);
        let targets = M::from_rows(&[
            schema.encode(&[0, 1, 2, 3]).unwrap(),
            schema.encode(&[2, 0, 0, 1]).unwrap(),
        ])
        .unwrap();
        let loss = grouped_softmax_nll(&logits, &targets, &schema).unwrap();
        let expected = 3.0f64.ln() + 4.0f64.ln() + 3.0f64.ln() + 4.0f64.ln();
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn schema_width_mismatch_is_rejected() {
        let schema = AttributeSchema::new(&[2, 2]).unwrap();
        let logits = M::zeros(1, 3);
        let targets = M::zeros(1, 3);
        assert!(grouped_softmax_nll(&logits, &targets, &schema).is_err());
    }

    #[test]
    fn taped_loss_matches_plain_loss() {
        let schema = AttributeSchema::new(&[2, 3]).unwrap();
        let logits = M::from_vec(2, 5, vec![0.2, -1.0, 0.5, 2.0, -0.3, 1.4, 0.1, -2.0, 0.0, 0.7])
            .unwrap();
        let targets = M::from_rows(&[
            schema.encode(&[1, 0]).unwrap(),
            schema.encode(&[0, 2]).unwrap(),
        ])
        .unwrap();
        let plain = grouped_softmax_nll(&logits, &targets, &schema).unwrap();

        let mut tape = GradTape::new();
        let l = tape.var(logits);
        let t = tape.constant(targets);
        let loss = tape_grouped_softmax_nll(&mut tape, l, t, &schema);
        assert!((tape.scalar(loss) - plain).abs() < 1e-12);
    }

    proptest! {
        // NLL of a softmax is nonnegative for any logits.
        #[test]
        fn loss_is_nonnegative(
            raw in proptest::collection::vec(-20.0f64..20.0, 6),
            target in 0usize..3,
        ) {
            let schema = AttributeSchema::new(&[3, 3]).unwrap();
            let logits = M::from_vec(2, 3, raw).unwrap();
            let t_row = schema.subset(&[0]).unwrap().encode(&[target]).unwrap();
            let targets = M::from_rows(&[t_row.clone(), t_row]).unwrap();
            let loss = grouped_softmax_nll(&logits, &targets, &schema.subset(&[0]).unwrap()).unwrap();
            prop_assert!(loss >= 0.0);
        }
    }
}
