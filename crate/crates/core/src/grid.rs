//! Data-driven regularization grid and sparsity-pattern extraction.
//!
//! At an unpenalized solution, the coordinate `(k, m, j)` is shrunk to zero by
//! any `lambda >= |S_{k,j,m}| / (n pi_k)`, so the set of those thresholds over
//! all coordinates is exactly the set of regularization values at which the
//! fitted support can change. The grid is that set, optionally thinned.

use crate::error::Result;
use crate::gem::{run_gem, score_matrices, GemConfig, PenaltyKind};
use crate::model::{Dataset, MixtureParams, SparsityPattern};

/// Default round-off guard when reading zeros off a thresholded fit.
pub const DEFAULT_PATTERN_TOL: f64 = 1e-10;

/// Per-coordinate shrinkage thresholds at a fitted state. `scores[k]` is the
/// p x q residual-correlation matrix `S_k`; the penalty kind decides whether
/// thresholds are per coordinate (lasso) or per couple across components
/// (group lasso). Zero and non-finite values are dropped; the result is
/// sorted ascending and deduplicated.
pub fn lambda_values_from_scores(
    scores: &[nalgebra::DMatrix<f64>],
    pi: &[f64],
    n: usize,
    penalty: PenaltyKind,
) -> Vec<f64> {
    let nf = n as f64;
    let mut values = Vec::new();
    match penalty {
        PenaltyKind::GroupLasso => {
            let (p, q) = (scores[0].nrows(), scores[0].ncols());
            let root_k = (scores.len() as f64).sqrt();
            for j in 0..p {
                for m in 0..q {
                    let norm: f64 = scores
                        .iter()
                        .map(|s| (s[(j, m)] / nf).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    values.push(norm / root_k);
                }
            }
        }
        _ => {
            for (k, s) in scores.iter().enumerate() {
                for v in s.iter() {
                    values.push(v.abs() / (nf * pi[k]));
                }
            }
        }
    }
    values.retain(|v| v.is_finite() && *v > 0.0);
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Build the regularization grid for `K` components: run unpenalized GEM to
/// convergence under the given config and collect the shrinkage thresholds at
/// the solution. The config's penalty kind selects the lasso or group-lasso
/// threshold formula; the internal fit is always unpenalized.
pub fn build_lambda_grid(data: &Dataset, k: usize, config: &GemConfig) -> Result<Vec<f64>> {
    let unpenalized = config
        .clone()
        .with_lambda(0.0)
        .with_penalty(PenaltyKind::None);
    let fit = run_gem(data, k, &unpenalized)?;
    let scores = score_matrices(&fit.params, data, &fit.tau);
    Ok(lambda_values_from_scores(
        &scores,
        fit.params.pi(),
        data.n(),
        config.penalty,
    ))
}

/// Thin a sorted grid to at most `count` values by evenly spaced order
/// statistics; the maximum is always kept.
pub fn thin_grid(grid: &[f64], count: usize) -> Vec<f64> {
    if grid.len() <= count || count == 0 {
        return grid.to_vec();
    }
    if count == 1 {
        return vec![*grid.last().unwrap()];
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let idx = (i * (grid.len() - 1)) / (count - 1);
        out.push(grid[idx]);
    }
    out.dedup();
    out
}

/// Relevant couples of a fitted parameter vector: `(m, j)` such that some
/// component carries a coefficient above `tol` in absolute value. Thresholded
/// fits produce exact zeros, so `tol` only guards round-off.
pub fn extract_pattern(params: &MixtureParams, tol: f64) -> SparsityPattern {
    let mut pairs = Vec::new();
    for m in 0..params.q() {
        for j in 0..params.p() {
            let max_abs = (0..params.k())
                .map(|k| params.phi(k)[(m, j)].abs())
                .fold(0.0, f64::max);
            if max_abs > tol {
                pairs.push((m, j));
            }
        }
    }
    SparsityPattern::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn lambda_values_formula_arithmetic() {
        // Single coordinate with |S| = 1, n = 10, pi = 0.5 -> lambda = 0.2.
        let scores = vec![DMatrix::from_row_slice(1, 1, &[-1.0])];
        let values = lambda_values_from_scores(&scores, &[0.5], 10, PenaltyKind::Lasso);
        assert_eq!(values.len(), 1);
        assert_relative_eq!(values[0], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn lambda_values_drop_zeros_and_sort() {
        let scores = vec![
            DMatrix::from_row_slice(2, 1, &[0.0, 4.0]),
            DMatrix::from_row_slice(2, 1, &[-2.0, 1.0]),
        ];
        let values = lambda_values_from_scores(&scores, &[0.5, 0.5], 4, PenaltyKind::Lasso);
        assert!(values.iter().all(|&v| v > 0.0));
        assert!(values.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(values.len(), 3); // 0 dropped
    }

    #[test]
    fn lambda_values_group_norm() {
        // K = 2, S = (3, 4), n = 5: ||(S/n)||/sqrt(2) = 1/sqrt(2).
        let scores = vec![
            DMatrix::from_row_slice(1, 1, &[3.0]),
            DMatrix::from_row_slice(1, 1, &[4.0]),
        ];
        let values = lambda_values_from_scores(&scores, &[0.5, 0.5], 5, PenaltyKind::GroupLasso);
        assert_relative_eq!(values[0], 1.0 / 2.0f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn grid_size_is_bounded_by_kpq() {
        let scores = vec![
            DMatrix::from_fn(3, 2, |j, m| (j + 2 * m + 1) as f64),
            DMatrix::from_fn(3, 2, |j, m| -((j + m + 1) as f64) * 0.37),
        ];
        let values = lambda_values_from_scores(&scores, &[0.6, 0.4], 7, PenaltyKind::Lasso);
        assert!(values.len() <= 2 * 3 * 2);
    }

    #[test]
    fn thin_grid_keeps_extremes() {
        let grid: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let thin = thin_grid(&grid, 20);
        assert_eq!(thin.len(), 20);
        assert_relative_eq!(thin[0], grid[0]);
        assert_relative_eq!(*thin.last().unwrap(), *grid.last().unwrap());
        let small = thin_grid(&grid[..5], 20);
        assert_eq!(small.len(), 5);
    }

    #[test]
    fn extract_pattern_zero_phi_is_empty() {
        let params = MixtureParams::new(
            vec![1.0],
            vec![DMatrix::zeros(2, 3)],
            vec![DVector::from_vec(vec![1.0, 1.0])],
        )
        .unwrap();
        assert!(extract_pattern(&params, DEFAULT_PATTERN_TOL).is_empty());
    }

    #[test]
    fn extract_pattern_single_entry() {
        let mut phi = vec![DMatrix::zeros(2, 4), DMatrix::zeros(2, 4)];
        phi[1][(1, 3)] = 2.5;
        let params = MixtureParams::new(
            vec![0.5, 0.5],
            phi,
            vec![
                DVector::from_vec(vec![1.0, 1.0]),
                DVector::from_vec(vec![1.0, 1.0]),
            ],
        )
        .unwrap();
        let pattern = extract_pattern(&params, DEFAULT_PATTERN_TOL);
        assert_eq!(pattern.pairs(), &[(1, 3)]);
    }
}
