//! Rank-constrained refitting: per-cluster reduced-rank regression via
//! truncated SVD inside a hard-assignment EM, plus enumeration of the rank
//! vectors spanned by a model subcollection.
//!
//! During the rank EM the weights and precisions are frozen at the values of
//! the initial parameters; only the regression matrices move.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gem::{e_step, GemConfig};
use crate::model::{
    log_likelihood, map_assign, Dataset, MixtureParams, ModelSpec, SparsityPattern,
};

/// Best rank-`r` approximation: zero all singular values after the `r`
/// largest. Ties among singular values keep earlier indices of the computed
/// decomposition.
pub fn truncate_svd(a: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let min_dim = a.nrows().min(a.ncols());
    if r == 0 || r > min_dim {
        return Err(Error::InvalidInput(format!(
            "rank {r} out of range for a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut kept = svd.singular_values.clone();
    kept.fill(0.0);
    for &idx in order.iter().take(r) {
        kept[idx] = svd.singular_values[idx];
    }
    Ok(u * DMatrix::from_diagonal(&kept) * vt)
}

/// Singular values above `rtol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// Moore-Penrose pseudo-inverse via SVD, inverting singular values above
/// `rtol * sigma_max`. Handles rank-deficient input.
pub fn pseudo_inverse(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let inv = svd.singular_values.map(|s| {
        if max > 0.0 && s > rtol * max {
            1.0 / s
        } else {
            0.0
        }
    });
    vt.transpose() * DMatrix::from_diagonal(&inv) * u.transpose()
}

/// All rank vectors `{1..bound}^K` with `bound = min(q_J, p_J, r_max)`, in
/// lexicographic order. `p_J` and `q_J` are the numbers of distinct predictor
/// columns and response rows in the pattern: the rank refit regresses on that
/// block only, so its rank cannot exceed either side.
pub fn enumerate_rank_vectors(
    k: usize,
    pattern: &SparsityPattern,
    q: usize,
    r_max: Option<usize>,
) -> Vec<Vec<usize>> {
    let p_j = pattern.columns().len();
    let q_j = pattern_rows(pattern).len().min(q);
    let bound = q_j.min(p_j).min(r_max.unwrap_or(DEFAULT_R_MAX));
    if bound == 0 || k == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(bound.pow(k as u32));
    let mut current = vec![1usize; k];
    loop {
        out.push(current.clone());
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if current[pos] < bound {
                current[pos] += 1;
                for v in current.iter_mut().skip(pos + 1) {
                    *v = 1;
                }
                break;
            }
            if pos == 0 {
                return out;
            }
        }
    }
}

/// Cap on enumerated ranks; constructing every rank vector is combinatorial
/// in K, so the subcollection is bounded by default.
pub const DEFAULT_R_MAX: usize = 6;

const PINV_RTOL: f64 = 1e-12;

/// Sorted distinct response rows appearing in a pattern.
fn pattern_rows(pattern: &SparsityPattern) -> Vec<usize> {
    let mut rows: Vec<usize> = pattern.iter().map(|(m, _)| m).collect();
    rows.sort_unstable();
    rows.dedup();
    rows
}

/// Dimension of a rank-constrained model: mixture weights and variances plus
/// the parameter count of one rank-`R_k` matrix of size q_J x p_J per
/// component, where the block spans the pattern's response rows and predictor
/// columns.
pub fn rank_model_dimension(k: usize, q: usize, q_j: usize, p_j: usize, ranks: &[usize]) -> usize {
    k * (q + 1) - 1 + ranks.iter().map(|&r| r * (p_j + q_j - r)).sum::<usize>()
}

/// Rank-constrained EM: alternate responsibilities, hard MAP assignment and
/// per-cluster least squares of the pattern's response rows on its predictor
/// columns, truncated to rank `R_k`, with weights and precisions frozen at
/// `init`. Coefficients outside the row/column block stay zero. Stops at an
/// assignment fixpoint or `config.max_iter`.
pub fn rank_refit(
    data: &Dataset,
    k: usize,
    pattern: &SparsityPattern,
    ranks: &[usize],
    init: &MixtureParams,
    config: &GemConfig,
) -> Result<ModelSpec> {
    if pattern.is_empty() {
        return Err(Error::InvalidInput(
            "rank refit needs a non-empty pattern".into(),
        ));
    }
    if ranks.len() != k || init.k() != k {
        return Err(Error::ShapeMismatch(
            "ranks and init must match the component count".into(),
        ));
    }
    let cols = pattern.columns();
    let rows_of = pattern_rows(pattern);
    let p_j = cols.len();
    let q_j = rows_of.len();
    let q = data.q();
    let bound = q_j.min(p_j);
    if ranks.iter().any(|&r| r == 0 || r > bound) {
        return Err(Error::InvalidInput(format!(
            "ranks must lie in 1..={bound}"
        )));
    }

    let n = data.n();
    let xs = DMatrix::from_fn(n, p_j, |i, c| data.x()[(i, cols[c])]);
    let ys = DMatrix::from_fn(n, q_j, |i, r| data.y()[(i, rows_of[r])]);

    let mut params = init.clone();
    for kc in 0..k {
        let phi = params.phi_mut(kc);
        for m in 0..phi.nrows() {
            for j in 0..phi.ncols() {
                if !cols.contains(&j) || !rows_of.contains(&m) {
                    phi[(m, j)] = 0.0;
                }
            }
        }
    }

    let mut previous: Option<Vec<usize>> = None;
    let mut converged = false;
    let mut flagged = false;
    for _ in 0..config.max_iter {
        let tau = e_step(&params, data)?;
        let assign = map_assign(&tau);
        if previous.as_ref() == Some(&assign) {
            converged = true;
            break;
        }
        for kc in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == kc + 1).collect();
            if members.is_empty() {
                flagged = true;
                continue; // keep the previous estimate for this component
            }
            let xk = DMatrix::from_fn(members.len(), p_j, |r, c| xs[(members[r], c)]);
            let yk = DMatrix::from_fn(members.len(), q_j, |r, m| ys[(members[r], m)]);
            let xtx = xk.transpose() * &xk;
            let coef = pseudo_inverse(&xtx, PINV_RTOL) * xk.transpose() * yk; // p_J x q_J
            let b_hat = truncate_svd(&coef.transpose(), ranks[kc])?; // q_J x p_J
            let phi = params.phi_mut(kc);
            for (r, &m) in rows_of.iter().enumerate() {
                for (c, &j) in cols.iter().enumerate() {
                    phi[(m, j)] = init.p_diag(kc)[m] * b_hat[(r, c)];
                }
            }
        }
        previous = Some(assign);
    }

    let loglik = log_likelihood(&params, data)?;
    Ok(ModelSpec {
        k,
        pattern: pattern.clone(),
        ranks: Some(ranks.to_vec()),
        params,
        loglik,
        dim: rank_model_dimension(k, q, q_j, p_j, ranks),
        converged: converged && !flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            rand::Rng::sample::<f64, _>(rng, rand_distr::StandardNormal)
        })
    }

    #[test]
    fn truncate_identity_keeps_two_directions() {
        let a = DMatrix::<f64>::identity(3, 3);
        let t = truncate_svd(&a, 2).unwrap();
        let sv = t.singular_values();
        let mut vals: Vec<f64> = sv.iter().cloned().collect();
        vals.sort_by(f64::total_cmp);
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[2], 1.0, epsilon = 1e-12);
        // Idempotent projection onto a two-dimensional spectrum.
        let tt = truncate_svd(&t, 2).unwrap();
        assert!((tt - &t).norm() < 1e-10);
    }

    #[test]
    fn truncate_fixes_low_rank_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_matrix(5, 2, &mut rng);
        let v = random_matrix(2, 4, &mut rng);
        let a = u * v; // rank <= 2
        let t = truncate_svd(&a, 3).unwrap();
        assert!((&t - &a).norm() < 1e-10);
    }

    #[test]
    fn truncate_diagonal_example() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let t = truncate_svd(&a, 1).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.0, 0.0]));
        assert!((t - expected).norm() < 1e-12);
    }

    #[test]
    fn truncate_rejects_out_of_range_rank() {
        let a = DMatrix::<f64>::identity(3, 3);
        assert!(truncate_svd(&a, 0).is_err());
        assert!(truncate_svd(&a, 4).is_err());
    }

    #[test]
    fn truncation_error_matches_discarded_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_matrix(6, 4, &mut rng);
            let sv = a.singular_values();
            let mut sorted: Vec<f64> = sv.iter().cloned().collect();
            sorted.sort_by(|x, y| y.total_cmp(x));
            for r in 1..=3usize {
                let t = truncate_svd(&a, r).unwrap();
                let err = (&a - &t).norm_squared();
                let expected: f64 = sorted[r..].iter().map(|s| s * s).sum();
                assert_relative_eq!(err, expected, epsilon = 1e-8, max_relative = 1e-8);
                assert!(numerical_rank(&t, 1e-8) <= r);
            }
        }
    }

    #[test]
    fn pseudo_inverse_gives_orthogonal_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Full rank and rank-deficient designs.
        for deficient in [false, true] {
            let mut x = random_matrix(10, 4, &mut rng);
            if deficient {
                let col = x.column(0).into_owned();
                x.set_column(3, &(col * 2.0)); // duplicate direction
            }
            let xtx = x.transpose() * &x;
            let proj = &x * pseudo_inverse(&xtx, PINV_RTOL) * x.transpose();
            assert!((&proj - proj.transpose()).norm() < 1e-8, "symmetric");
            assert!((&proj * &proj - &proj).norm() < 1e-8, "idempotent");
        }
    }

    #[test]
    fn enumerate_rank_vectors_examples() {
        let pattern = SparsityPattern::from_pairs(vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(
            enumerate_rank_vectors(1, &pattern, 3, None),
            vec![vec![1], vec![2], vec![3]]
        );
        let two = SparsityPattern::from_pairs(vec![(0, 0), (1, 1)]);
        assert_eq!(
            enumerate_rank_vectors(2, &two, 2, None),
            vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]
        );
        let wide = SparsityPattern::full(4, 5);
        assert_eq!(enumerate_rank_vectors(2, &wide, 4, Some(3)).len(), 9);
        assert!(enumerate_rank_vectors(2, &SparsityPattern::empty(), 4, None).is_empty());
    }

    #[test]
    fn rank_refit_full_rank_single_component_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 50;
        let (p, q) = (4, 3);
        let x = random_matrix(n, p, &mut rng);
        let b = random_matrix(q, p, &mut rng);
        let y = DMatrix::from_fn(n, q, |i, m| {
            (0..p).map(|j| b[(m, j)] * x[(i, j)]).sum::<f64>()
                + 0.05 * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        });
        let data = Dataset::new(x.clone(), y.clone(), None).unwrap();
        let init = MixtureParams::new(
            vec![1.0],
            vec![DMatrix::zeros(q, p)],
            vec![DVector::from_element(q, 1.0)],
        )
        .unwrap();
        let pattern = SparsityPattern::full(q, p);
        let config = GemConfig::default();
        let spec = rank_refit(&data, 1, &pattern, &[q.min(p)], &init, &config).unwrap();
        // Normal-equations oracle.
        let coef = nalgebra::Cholesky::new(x.transpose() * &x)
            .unwrap()
            .solve(&(x.transpose() * &y));
        let fitted_b = spec.params.regression_matrix(0);
        for m in 0..q {
            for j in 0..p {
                assert_relative_eq!(fitted_b[(m, j)], coef[(j, m)], epsilon = 1e-8);
            }
        }
        assert!(spec.converged);
    }

    #[test]
    fn rank_refit_recovers_rank_one_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 2000;
        let (p, q) = (5, 4);
        let x = random_matrix(n, p, &mut rng);
        // Rank-1 truth shared support over all predictors.
        let u = random_matrix(q, 1, &mut rng);
        let v = random_matrix(1, p, &mut rng);
        let b = u * v;
        let y = DMatrix::from_fn(n, q, |i, m| {
            (0..p).map(|j| b[(m, j)] * x[(i, j)]).sum::<f64>()
                + 0.2 * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        });
        let data = Dataset::new(x, y, None).unwrap();
        let init = MixtureParams::new(
            vec![1.0],
            vec![DMatrix::zeros(q, p)],
            vec![DVector::from_element(q, 1.0)],
        )
        .unwrap();
        let pattern = SparsityPattern::full(q, p);
        let spec = rank_refit(&data, 1, &pattern, &[1], &init, &GemConfig::default()).unwrap();
        let fitted_b = spec.params.regression_matrix(0);
        let rel = (&fitted_b - &b).norm() / b.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
        assert_eq!(numerical_rank(&fitted_b, 1e-8), 1);
    }

    #[test]
    fn rank_model_dimension_formula() {
        // K (q+1) - 1 + sum_k R_k (p_J + q_J - R_k)
        assert_eq!(rank_model_dimension(2, 10, 4, 4, &[4, 4]), 21 + 2 * 16);
        assert_eq!(rank_model_dimension(1, 3, 3, 2, &[1]), 3 + 4);
    }

    #[test]
    fn rank_refit_fills_only_the_pattern_block() {
        // Signal on rows {0,1} and columns {0,1}; the refit must leave every
        // coefficient outside that block at zero and fill the block densely.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 60;
        let (p, q) = (4, 3);
        let x = random_matrix(n, p, &mut rng);
        let y = DMatrix::from_fn(n, q, |i, m| {
            let signal = match m {
                0 => 2.0 * x[(i, 0)] - 1.0 * x[(i, 1)],
                1 => 0.5 * x[(i, 0)] + 1.5 * x[(i, 1)],
                _ => 0.0,
            };
            signal + 0.1 * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
        });
        let data = Dataset::new(x, y, None).unwrap();
        let init = MixtureParams::new(
            vec![1.0],
            vec![DMatrix::zeros(q, p)],
            vec![DVector::from_element(q, 1.0)],
        )
        .unwrap();
        let pattern = SparsityPattern::from_pairs(vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        let spec = rank_refit(&data, 1, &pattern, &[2], &init, &GemConfig::default()).unwrap();
        for m in 0..q {
            for j in 0..p {
                let v = spec.params.phi(0)[(m, j)];
                if m < 2 && j < 2 {
                    assert!(v != 0.0, "block entry ({m},{j}) is zero");
                } else {
                    assert_eq!(v, 0.0, "off-block entry ({m},{j})");
                }
            }
        }
        assert_eq!(spec.dim, rank_model_dimension(1, q, 2, 2, &[2]));
    }
}
