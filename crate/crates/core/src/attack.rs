//! Recovering another data holder's unique variability from shared model
//! components.
//!
//! A holder that knows the global weights `W` (fitted on everyone's rows) and
//! its own local weights `W_i` projects `W` onto the orthogonal complement of
//! `span(W_i)`:
//!
//! `W_perp = W - W_i (W_i^T W_i)^{-1} W_i^T W`
//!
//! Whatever survives lies in the global row space but outside the local one,
//! i.e. it is variability that only the other holders contributed. The same
//! projection works on loadings matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_many_checked;

/// Relative rank tolerance for the local basis, applied to its Gram matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub w_perp: Array2<f64>,
    /// `|cos|` between each column of `w_perp` and the reference signal.
    pub per_component_similarity: Vec<f64>,
    pub component_argmax: usize,
}

impl AttackReport {
    pub fn best_similarity(&self) -> f64 {
        self.per_component_similarity[self.component_argmax]
    }
}

/// Project the columns of `global` off the column space of `local`.
pub fn orthogonal_complement_weights(
    global: ArrayView2<'_, f64>,
    local: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if global.nrows() != local.nrows() {
        return Err(Error::Shape(format!(
            "global components have {} rows, local components {}",
            global.nrows(),
            local.nrows()
        )));
    }
    if local.ncols() == 0 {
        return Ok(global.to_owned());
    }
    // Scale local columns to unit norm so the rank test is relative.
    let mut basis = local.to_owned();
    for (j, mut col) in basis.columns_mut().into_iter().enumerate() {
        let n = col.dot(&col).sqrt();
        if n == 0.0 {
            return Err(rank_error(j, f64::INFINITY));
        }
        col /= n;
    }
    let gram = basis.t().dot(&basis);
    let rhs = basis.t().dot(&global);
    let coef = solve_many_checked(gram.view(), rhs.view(), 1.0 / RANK_TOLERANCE)
        .map_err(|s| rank_error(local.ncols(), s.condition))?;
    Ok(&global - &basis.dot(&coef))
}

fn rank_error(components: usize, condition: f64) -> Error {
    Error::Singular {
        components,
        condition,
        hint: "local components are rank deficient; prune dependent columns",
    }
}

/// Absolute cosine similarity; zero when either vector has zero norm.
pub fn abs_cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(&b) / (na * nb)).abs().min(1.0)
}

pub fn attack_and_score(
    global: ArrayView2<'_, f64>,
    local: ArrayView2<'_, f64>,
    truth_signal: ArrayView1<'_, f64>,
) -> Result<AttackReport> {
    if truth_signal.len() != global.nrows() {
        return Err(Error::Shape(format!(
            "reference signal has {} channels, components have {}",
            truth_signal.len(),
            global.nrows()
        )));
    }
    if truth_signal.iter().all(|&v| v == 0.0) {
        return Err(Error::Argument("reference signal must be nonzero".into()));
    }
    let w_perp = orthogonal_complement_weights(global, local)?;
    Ok(score(w_perp, truth_signal))
}

/// Similarity report for an already projected matrix.
pub fn score(w_perp: Array2<f64>, truth_signal: ArrayView1<'_, f64>) -> AttackReport {
    let sims: Vec<f64> = w_perp
        .columns()
        .into_iter()
        .map(|c| abs_cosine(c, truth_signal))
        .collect();
    let argmax = sims
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| {
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        })
        .0;
    AttackReport {
        w_perp,
        per_component_similarity: sims,
        component_argmax: argmax,
    }
}

/// Part of `signal` orthogonal to the columns of `basis`.
pub fn residual_direction(
    signal: ArrayView1<'_, f64>,
    basis: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    let s = signal.to_owned().insert_axis(ndarray::Axis(1));
    let r = orthogonal_complement_weights(s.view(), basis)?;
    Ok(r.column(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn projecting_onto_itself_gives_zero() {
        let mut rng = RngStream::new(1, 1);
        let w = Array2::from_shape_fn((8, 3), |_| rng.standard_normal());
        let r = orthogonal_complement_weights(w.view(), w.view()).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn coordinate_projection() {
        let local = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]];
        let global = Array2::<f64>::eye(4);
        let r = orthogonal_complement_weights(global.view(), local.view()).unwrap();
        let expected = array![
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0]
        ];
        assert_eq!(r, expected);
    }

    #[test]
    fn rank_deficient_local_rejected() {
        let local = array![[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]];
        let global = Array2::<f64>::eye(3);
        assert!(matches!(
            orthogonal_complement_weights(global.view(), local.view()),
            Err(Error::Singular { .. })
        ));
        let zero_col = array![[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        assert!(orthogonal_complement_weights(global.view(), zero_col.view()).is_err());
    }

    #[test]
    fn row_mismatch_rejected() {
        let a = Array2::<f64>::zeros((3, 1));
        let b = Array2::<f64>::eye(4);
        assert!(matches!(
            orthogonal_complement_weights(a.view(), b.view()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn similarity_cases() {
        let w_perp = array![[0.0, 1.0], [0.0, 0.0], [2.0, 0.0]];
        let truth = array![0.0, 1.0, 0.0];
        let local = Array2::<f64>::zeros((3, 0));
        let rep = attack_and_score(w_perp.view(), local.view(), truth.view()).unwrap();
        assert_eq!(rep.per_component_similarity, vec![0.0, 0.0]);

        let truth = array![-3.0, 0.0, 0.0];
        let rep = attack_and_score(w_perp.view(), local.view(), truth.view()).unwrap();
        assert_eq!(rep.per_component_similarity, vec![0.0, 1.0]);
        assert_eq!(rep.component_argmax, 1);
        assert_eq!(rep.best_similarity(), 1.0);

        assert!(attack_and_score(w_perp.view(), local.view(), array![0.0, 0.0, 0.0].view())
            .is_err());
    }

    #[test]
    fn zero_column_scores_zero() {
        let rep = score(Array2::zeros((3, 2)), array![1.0, 0.0, 0.0].view());
        assert_eq!(rep.per_component_similarity, vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_orthogonal(seed in 0u64..10_000, k in 1usize..5) {
            let mut rng = RngStream::new(seed, 0);
            let m = 12;
            let global = Array2::from_shape_fn((m, k), |_| rng.standard_normal());
            let local = Array2::from_shape_fn((m, k), |_| rng.standard_normal());
            let once = orthogonal_complement_weights(global.view(), local.view()).unwrap();
            let twice = orthogonal_complement_weights(once.view(), local.view()).unwrap();
            for (a, b) in once.iter().zip(twice.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (i, lc) in local.columns().into_iter().enumerate() {
                for (j, oc) in once.columns().into_iter().enumerate() {
                    let scale = lc.dot(&lc).sqrt() * global.column(j).dot(&global.column(j)).sqrt();
                    prop_assert!((lc.dot(&oc) / scale).abs() < 1e-8, "({i},{j})");
                }
            }
        }
    }
}
