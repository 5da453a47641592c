//! Domain types and likelihood machinery for finite mixtures of Gaussian
//! regressions with diagonal covariances.
//!
//! The parametrization is `theta = (pi, Phi, P)` where for each component `k`
//! the precision factor `P_k` is diagonal positive with `P_k' P_k = Sigma_k^-1`
//! and `Phi_k = P_k B_k` absorbs the regression matrix. It keeps the penalized
//! estimator scale invariant and couples small variances into the penalty.
//! All density evaluation is done in log space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837877066409345483560659472811;

/// Paired observations: predictors `x` (n rows of dimension p) and responses
/// `y` (n rows of dimension q), plus optional ground-truth cluster labels
/// used only for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Labels, when present, are 1-based cluster ids.
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidInput(
                "dataset needs n >= 1, p >= 1, q >= 1".into(),
            ));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "x has {} rows, y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset entries must be finite".into()));
        }
        if let Some(ref l) = labels {
            if l.len() != x.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} rows",
                    l.len(),
                    x.nrows()
                )));
            }
            if l.contains(&0) {
                return Err(Error::InvalidInput("labels are 1-based".into()));
            }
        }
        Ok(Self { x, y, labels })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn x_row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    pub fn y_row(&self, i: usize) -> DVector<f64> {
        self.y.row(i).transpose()
    }
}

/// Full parameter vector of a K-component mixture: weights `pi`, scaled
/// regression matrices `Phi_k` (q x p) and diagonal precision factors `P_k`
/// stored as positive length-q vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pi: Vec<f64>,
    phi: Vec<DMatrix<f64>>,
    p_diag: Vec<DVector<f64>>,
}

impl MixtureParams {
    pub fn new(pi: Vec<f64>, phi: Vec<DMatrix<f64>>, p_diag: Vec<DVector<f64>>) -> Result<Self> {
        let k = pi.len();
        if k == 0 || phi.len() != k || p_diag.len() != k {
            return Err(Error::ShapeMismatch(
                "pi, Phi and P must agree on the component count".into(),
            ));
        }
        if pi.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("mixture weights must be positive".into()));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "mixture weights sum to {s}, expected 1"
            )));
        }
        let (q, p) = (phi[0].nrows(), phi[0].ncols());
        for (f, d) in phi.iter().zip(&p_diag) {
            if f.nrows() != q || f.ncols() != p || d.len() != q {
                return Err(Error::ShapeMismatch("inconsistent component shapes".into()));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("Phi entries must be finite".into()));
            }
            if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "precision diagonals must be positive".into(),
                ));
            }
        }
        Ok(Self { pi, phi, p_diag })
    }

    /// Build parameters from the natural form: regression matrices `B_k` and
    /// per-coordinate variances, via `P = diag(1/sigma)` and `Phi = P B`.
    pub fn from_regression(
        pi: Vec<f64>,
        b: Vec<DMatrix<f64>>,
        variances: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if b.len() != variances.len() {
            return Err(Error::ShapeMismatch("B and variance counts differ".into()));
        }
        let mut phi = Vec::with_capacity(b.len());
        let mut p_diag = Vec::with_capacity(b.len());
        for (bk, var) in b.into_iter().zip(variances) {
            if var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidInput("variances must be positive".into()));
            }
            let pk: DVector<f64> = var.map(|v| 1.0 / v.sqrt());
            let mut fk = bk;
            for m in 0..fk.nrows() {
                for j in 0..fk.ncols() {
                    fk[(m, j)] *= pk[m];
                }
            }
            phi.push(fk);
            p_diag.push(pk);
        }
        Self::new(pi, phi, p_diag)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn q(&self) -> usize {
        self.phi[0].nrows()
    }

    pub fn p(&self) -> usize {
        self.phi[0].ncols()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn phi(&self, k: usize) -> &DMatrix<f64> {
        &self.phi[k]
    }

    pub fn p_diag(&self, k: usize) -> &DVector<f64> {
        &self.p_diag[k]
    }

    pub(crate) fn pi_mut(&mut self) -> &mut Vec<f64> {
        &mut self.pi
    }

    pub(crate) fn phi_mut(&mut self, k: usize) -> &mut DMatrix<f64> {
        &mut self.phi[k]
    }

    pub(crate) fn p_diag_mut(&mut self, k: usize) -> &mut DVector<f64> {
        &mut self.p_diag[k]
    }

    /// Regression matrix `B_k = P_k^-1 Phi_k`.
    pub fn regression_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut b = self.phi[k].clone();
        for m in 0..b.nrows() {
            for j in 0..b.ncols() {
                b[(m, j)] /= self.p_diag[k][m];
            }
        }
        b
    }

    /// Diagonal of `Sigma_k = (P_k' P_k)^-1`.
    pub fn covariance_diag(&self, k: usize) -> DVector<f64> {
        self.p_diag[k].map(|v| 1.0 / (v * v))
    }

    /// Entrywise l1 norm of `Phi_k`.
    pub fn phi_l1(&self, k: usize) -> f64 {
        self.phi[k].iter().map(|v| v.abs()).sum()
    }

    /// Reorder components into the canonical order used for comparisons:
    /// descending weight, ties broken lexicographically on `Phi` entries.
    /// Component labels carry no meaning in the model family.
    pub fn canonicalized(&self) -> Self {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| {
            self.pi[b]
                .total_cmp(&self.pi[a])
                .then_with(|| {
                    for (u, v) in self.phi[a].iter().zip(self.phi[b].iter()) {
                        let c = u.total_cmp(v);
                        if c != std::cmp::Ordering::Equal {
                            return c;
                        }
                    }
                    std::cmp::Ordering::Equal
                })
        });
        Self {
            pi: order.iter().map(|&k| self.pi[k]).collect(),
            phi: order.iter().map(|&k| self.phi[k].clone()).collect(),
            p_diag: order.iter().map(|&k| self.p_diag[k].clone()).collect(),
        }
    }

    /// Largest relative change against another parameter vector of the same
    /// shape (sup over all coordinates of |new - old| / (1 + |old|)).
    pub fn relative_change(&self, old: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for k in 0..self.k() {
            d = d.max((self.pi[k] - old.pi[k]).abs() / (1.0 + old.pi[k].abs()));
            for (a, b) in self.phi[k].iter().zip(old.phi[k].iter()) {
                d = d.max((a - b).abs() / (1.0 + b.abs()));
            }
            for (a, b) in self.p_diag[k].iter().zip(old.p_diag[k].iter()) {
                d = d.max((a - b).abs() / (1.0 + b.abs()));
            }
        }
        d
    }
}

/// Set of relevant couples `(m, j)`: response coordinate `m` is explained by
/// predictor `j` in at least one component. Stored sorted row-major so equal
/// sets compare and serialize identically. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SparsityPattern {
    pairs: Vec<(usize, usize)>,
}

impl SparsityPattern {
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    pub fn empty() -> Self {
        Self { pairs: Vec::new() }
    }

    pub fn full(q: usize, p: usize) -> Self {
        let mut pairs = Vec::with_capacity(q * p);
        for m in 0..q {
            for j in 0..p {
                pairs.push((m, j));
            }
        }
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, m: usize, j: usize) -> bool {
        self.pairs.binary_search(&(m, j)).is_ok()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    /// Sorted distinct predictor columns appearing in the pattern.
    pub fn columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self.pairs.iter().map(|&(_, j)| j).collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.pairs.iter().all(|&(m, j)| other.contains(m, j))
    }
}

/// One fitted model of the collection: its index `(K, J, R)`, parameters,
/// maximized log-likelihood on the fit data and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub k: usize,
    pub pattern: SparsityPattern,
    pub ranks: Option<Vec<usize>>,
    pub params: MixtureParams,
    pub loglik: f64,
    pub dim: usize,
    pub converged: bool,
}

/// Posterior membership matrix `tau` (n x K); rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    tau: DMatrix<f64>,
}

impl Responsibilities {
    pub fn new(tau: DMatrix<f64>) -> Result<Self> {
        for i in 0..tau.nrows() {
            let mut s = 0.0;
            for k in 0..tau.ncols() {
                let v = tau[(i, k)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidInput(
                        "responsibilities must be finite and non-negative".into(),
                    ));
                }
                s += v;
            }
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "responsibility row {i} sums to {s}"
                )));
            }
        }
        Ok(Self { tau })
    }

    pub fn n(&self) -> usize {
        self.tau.nrows()
    }

    pub fn k(&self) -> usize {
        self.tau.ncols()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.tau[(i, k)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.tau
    }

    /// Column sums `n_k`.
    pub fn component_masses(&self) -> Vec<f64> {
        (0..self.k()).map(|k| self.tau.column(k).sum()).collect()
    }
}

/// Per-component log weights of the mixture density at one observation,
/// without the shared `-(q/2) ln(2 pi)` constant.
pub(crate) fn log_weights(params: &MixtureParams, x: &DVector<f64>, y: &DVector<f64>) -> Vec<f64> {
    (0..params.k())
        .map(|k| {
            let mut w = params.pi()[k].ln();
            let pk = params.p_diag(k);
            let mean = params.phi(k) * x;
            for m in 0..params.q() {
                let r = pk[m] * y[m] - mean[m];
                w += pk[m].ln() - 0.5 * r * r;
            }
            w
        })
        .collect()
}

pub(crate) fn log_sum_exp(w: &[f64]) -> f64 {
    let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + w.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Log of the mixture conditional density `h_theta(y | x)`.
pub fn log_density(params: &MixtureParams, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != params.p() || y.len() != params.q() {
        return Err(Error::ShapeMismatch(format!(
            "expected x of length {} and y of length {}",
            params.p(),
            params.q()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("x and y must be finite".into()));
    }
    let w = log_weights(params, x, y);
    Ok(log_sum_exp(&w) - 0.5 * params.q() as f64 * LN_2PI)
}

/// Sample log-likelihood: sum of `log_density` over the dataset rows.
pub fn log_likelihood(params: &MixtureParams, data: &Dataset) -> Result<f64> {
    if data.p() != params.p() || data.q() != params.q() {
        return Err(Error::ShapeMismatch(format!(
            "data is {}x{} -> {}, params expect p={}, q={}",
            data.n(),
            data.p(),
            data.q(),
            params.p(),
            params.q()
        )));
    }
    let mut total = 0.0;
    for i in 0..data.n() {
        total += log_density(params, &data.x_row(i), &data.y_row(i))?;
    }
    Ok(total)
}

/// Lasso-penalized objective `-(1/n) loglik + lambda sum_k pi_k ||Phi_k||_1`.
pub fn penalized_objective(params: &MixtureParams, data: &Dataset, lambda: f64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput("lambda must be non-negative".into()));
    }
    let ll = log_likelihood(params, data)?;
    let pen: f64 = (0..params.k())
        .map(|k| params.pi()[k] * params.phi_l1(k))
        .sum();
    Ok(-ll / data.n() as f64 + lambda * pen)
}

/// MAP clustering: row-wise argmax of the responsibilities, ties broken by
/// the lowest component index. Returns 1-based cluster ids.
pub fn map_assign(tau: &Responsibilities) -> Vec<usize> {
    (0..tau.n())
        .map(|i| {
            let mut best = 0;
            for k in 1..tau.k() {
                if tau.get(i, k) > tau.get(i, best) {
                    best = k;
                }
            }
            best + 1
        })
        .collect()
}

/// Dimension of the model with `K` components and `j_size` relevant couples:
/// `K (|J| + q + 1) - 1`.
pub fn model_dimension(k: usize, j_size: usize, q: usize) -> usize {
    assert!(k >= 1 && q >= 1, "model_dimension needs K >= 1 and q >= 1");
    k * (j_size + q + 1) - 1
}
