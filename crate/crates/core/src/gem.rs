//! Generalized EM for the (penalized) mixture-of-regressions estimators.
//!
//! One iteration alternates the E-step with an M-step sweep in fixed order
//! pi -> P -> Phi. The pi update is line-searched on the expected complete
//! penalized log-likelihood, each P entry is the positive root of a scalar
//! quadratic, and Phi is swept coordinatewise with soft thresholding (lasso),
//! block thresholding across components (group lasso) or plain coordinate
//! least squares (no penalty). The M-step only improves the objective, so the
//! penalized objective is non-increasing across iterations.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    log_likelihood, log_weights, map_assign, penalized_objective, Dataset, MixtureParams,
    Responsibilities, SparsityPattern,
};

/// Penalty attached to the fitted estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyKind {
    #[default]
    None,
    Lasso,
    GroupLasso,
}

/// Tuning knobs of a GEM run.
#[derive(Debug, Clone)]
pub struct GemConfig {
    pub lambda: f64,
    pub min_iter: usize,
    pub max_iter: usize,
    /// Relative stopping tolerance on the penalized objective.
    pub eps_loglik: f64,
    /// Relative sup-norm stopping tolerance on the parameters.
    pub eps_param: f64,
    /// Base of the step grid {delta^l} for the pi line search.
    pub line_search_base: f64,
    /// Cap on the line-search exponent l.
    pub line_search_max: usize,
    /// Number of seeded k-means starts tried by `initialize`.
    pub n_init: usize,
    /// GEM iterations run on each start before picking the best.
    pub init_iter: usize,
    pub seed: u64,
    pub penalty: PenaltyKind,
    /// Couples outside this set are frozen at zero during the whole run.
    pub restriction: Option<SparsityPattern>,
}

impl Default for GemConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            min_iter: 10,
            max_iter: 1000,
            eps_loglik: 1e-6,
            eps_param: 1e-5,
            line_search_base: 0.1,
            line_search_max: 20,
            n_init: 50,
            init_iter: 10,
            seed: 0,
            penalty: PenaltyKind::None,
            restriction: None,
        }
    }
}

impl GemConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyKind) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_restriction(mut self, restriction: Option<SparsityPattern>) -> Self {
        self.restriction = restriction;
        self
    }

    pub fn with_starts(mut self, n_init: usize, init_iter: usize) -> Self {
        self.n_init = n_init;
        self.init_iter = init_iter;
        self
    }

    pub fn with_iteration_limits(mut self, min_iter: usize, max_iter: usize) -> Self {
        self.min_iter = min_iter;
        self.max_iter = max_iter;
        self
    }

    pub fn with_tolerances(mut self, eps_loglik: f64, eps_param: f64) -> Self {
        self.eps_loglik = eps_loglik;
        self.eps_param = eps_param;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidInput("lambda must be non-negative".into()));
        }
        if self.min_iter > self.max_iter || self.max_iter == 0 {
            return Err(Error::InvalidInput(
                "need 1 <= min_iter <= max_iter".into(),
            ));
        }
        if !(self.line_search_base > 0.0 && self.line_search_base < 1.0) {
            return Err(Error::InvalidInput(
                "line_search_base must lie in (0, 1)".into(),
            ));
        }
        if !(self.eps_loglik > 0.0) || !(self.eps_param > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.n_init == 0 {
            return Err(Error::InvalidInput("n_init must be positive".into()));
        }
        Ok(())
    }

    fn effective_lambda(&self) -> f64 {
        match self.penalty {
            PenaltyKind::None => 0.0,
            _ => self.lambda,
        }
    }
}

/// Result of a GEM run.
#[derive(Debug, Clone)]
pub struct GemFit {
    pub params: MixtureParams,
    pub tau: Responsibilities,
    /// Penalized objective before the first iteration and after each one.
    pub objective_trace: Vec<f64>,
    /// False when `max_iter` was reached before both stopping criteria held.
    pub converged: bool,
    /// True when a component emptied out (its weight was floored) during the run.
    pub flagged: bool,
}

/// Per-component weighted second moments of one E-step: `n_k`, the Gram
/// matrices of the sqrt(tau)-scaled predictors, the predictor/response cross
/// moments and the weighted squared response norms. Everything the M-step
/// formulas consume.
#[derive(Debug, Clone)]
pub struct WeightedMoments {
    pub n: usize,
    pub nk: Vec<f64>,
    /// `gram[k][(j, j2)] = sum_i tau_ik x_ij x_ij2` (p x p).
    pub gram: Vec<DMatrix<f64>>,
    /// `xy[k][(j, m)] = sum_i tau_ik x_ij y_im` (p x q).
    pub xy: Vec<DMatrix<f64>>,
    /// `yy[k][m] = sum_i tau_ik y_im^2`.
    pub yy: Vec<DVector<f64>>,
}

impl WeightedMoments {
    pub fn new(data: &Dataset, tau: &Responsibilities) -> Self {
        let (n, p, q, kk) = (data.n(), data.p(), data.q(), tau.k());
        let mut nk = vec![0.0; kk];
        let mut gram = Vec::with_capacity(kk);
        let mut xy = Vec::with_capacity(kk);
        let mut yy = Vec::with_capacity(kk);
        for k in 0..kk {
            let mut xw = DMatrix::zeros(n, p);
            let mut yw = DMatrix::zeros(n, q);
            for i in 0..n {
                let w = tau.get(i, k);
                nk[k] += w;
                let sw = w.sqrt();
                for j in 0..p {
                    xw[(i, j)] = sw * data.x()[(i, j)];
                }
                for m in 0..q {
                    yw[(i, m)] = sw * data.y()[(i, m)];
                }
            }
            gram.push(xw.transpose() * &xw);
            xy.push(xw.transpose() * &yw);
            yy.push(DVector::from_iterator(
                q,
                (0..q).map(|m| yw.column(m).norm_squared()),
            ));
        }
        Self { n, nk, gram, xy, yy }
    }
}

/// E-step: posterior responsibilities under the current parameters, computed
/// through log-space weights and a rowwise log-sum-exp.
pub fn e_step(params: &MixtureParams, data: &Dataset) -> Result<Responsibilities> {
    if data.p() != params.p() || data.q() != params.q() {
        return Err(Error::ShapeMismatch(
            "data and params disagree on p or q".into(),
        ));
    }
    let (n, kk) = (data.n(), params.k());
    let mut tau = DMatrix::zeros(n, kk);
    for i in 0..n {
        let w = log_weights(params, &data.x_row(i), &data.y_row(i));
        let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for k in 0..kk {
            let v = (w[k] - m).exp();
            tau[(i, k)] = v;
            s += v;
        }
        for k in 0..kk {
            tau[(i, k)] /= s;
        }
    }
    Responsibilities::new(tau)
}

/// Line-searched mixture-weight update `pi + t (n_k / n - pi)`, with `t` the
/// largest `delta^l` that does not increase the pi-dependent part of the
/// expected complete penalized log-likelihood. `penalty_weights[k]` is the
/// coefficient of `pi_k` in the penalty (`lambda ||Phi_k||_1` for the lasso,
/// zero otherwise). Returns the new weights and the accepted step, `None`
/// when no step improved.
pub fn pi_update(
    pi: &[f64],
    nk: &[f64],
    n: usize,
    penalty_weights: &[f64],
    config: &GemConfig,
) -> (Vec<f64>, Option<f64>) {
    let nf = n as f64;
    let objective = |w: &[f64]| -> f64 {
        let mut v = 0.0;
        for k in 0..w.len() {
            if nk[k] > 0.0 {
                v -= nk[k] * w[k].ln() / nf;
            }
            v += penalty_weights[k] * w[k];
        }
        v
    };
    let current = objective(pi);
    for l in 0..=config.line_search_max {
        let t = config.line_search_base.powi(l as i32);
        let candidate: Vec<f64> = pi
            .iter()
            .zip(nk)
            .map(|(&w, &m)| w + t * (m / nf - w))
            .collect();
        if objective(&candidate) <= current {
            return (candidate, Some(t));
        }
    }
    (pi.to_vec(), None)
}

/// Precision update for coordinate `(k, m)`: positive root of
/// `-1 + P^2 ||ytilde||^2 / n_k - P <ytilde, Phi xtilde> / n_k = 0`.
pub fn p_update(
    moments: &WeightedMoments,
    params: &MixtureParams,
    k: usize,
    m: usize,
) -> Result<f64> {
    let syy = moments.yy[k][m];
    if !(syy > 0.0) {
        return Err(Error::DegenerateResponse { k, m });
    }
    let nk = moments.nk[k];
    let mut dot = 0.0;
    for j in 0..params.p() {
        dot += params.phi(k)[(m, j)] * moments.xy[k][(j, m)];
    }
    let disc = dot * dot + 4.0 * nk * syy;
    Ok((dot + disc.sqrt()) / (2.0 * syy))
}

/// Residual correlation `S_{k,j,m}` of coordinate `(k, m, j)` given the
/// current parameters: the gradient of the quadratic part of the M-step
/// objective at zero, excluding the coordinate's own contribution.
pub fn score(
    moments: &WeightedMoments,
    params: &MixtureParams,
    k: usize,
    m: usize,
    j: usize,
) -> f64 {
    let gram = &moments.gram[k];
    let mut cross = 0.0;
    for j2 in 0..params.p() {
        cross += gram[(j, j2)] * params.phi(k)[(m, j2)];
    }
    cross -= gram[(j, j)] * params.phi(k)[(m, j)];
    -params.p_diag(k)[m] * moments.xy[k][(j, m)] + cross
}

/// Soft-thresholded coordinate update of `[Phi_k]_{m,j}` at threshold
/// `n lambda pi_k`. A predictor absent from the weighted cluster
/// (`||xtilde||^2 = 0`) yields zero.
pub fn phi_coordinate_update(
    moments: &WeightedMoments,
    params: &MixtureParams,
    k: usize,
    m: usize,
    j: usize,
    lambda: f64,
) -> f64 {
    let a = moments.gram[k][(j, j)];
    if !(a > 0.0) {
        return 0.0;
    }
    let s = score(moments, params, k, m, j);
    let thr = moments.n as f64 * lambda * params.pi()[k];
    if s > thr {
        (-s + thr) / a
    } else if s < -thr {
        -(s + thr) / a
    } else {
        0.0
    }
}

/// Block update of the couple `(m, j)` across all components for the
/// group-lasso penalty `lambda sqrt(K) sum_{m,j} ||(Phi_k)_{m,j}||_2`.
///
/// The block is zero when the gradient norm at zero is below
/// `n lambda sqrt(K)`; otherwise the per-component scalings differ, so the
/// block norm solves a one-dimensional fixed point found by bisection.
pub fn phi_group_update(
    moments: &WeightedMoments,
    params: &MixtureParams,
    m: usize,
    j: usize,
    lambda: f64,
) -> Vec<f64> {
    let kk = params.k();
    let a: Vec<f64> = (0..kk).map(|k| moments.gram[k][(j, j)]).collect();
    let s: Vec<f64> = (0..kk)
        .map(|k| {
            if a[k] > 0.0 {
                score(moments, params, k, m, j)
            } else {
                0.0
            }
        })
        .collect();
    if lambda == 0.0 {
        return (0..kk)
            .map(|k| if a[k] > 0.0 { -s[k] / a[k] } else { 0.0 })
            .collect();
    }
    let thr = moments.n as f64 * lambda * (kk as f64).sqrt();
    let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s_norm <= thr {
        return vec![0.0; kk];
    }
    // ||u(nu)||_2 with u_k(nu) = -s_k nu / (a_k nu + thr).
    let block_norm = |nu: f64| -> f64 {
        s.iter()
            .zip(&a)
            .map(|(&sk, &ak)| {
                let u = sk * nu / (ak * nu + thr);
                u * u
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut hi = 1.0
        + s.iter()
            .zip(&a)
            .filter(|(_, &ak)| ak > 0.0)
            .map(|(&sk, &ak)| (sk / ak) * (sk / ak))
            .sum::<f64>()
            .sqrt();
    let mut guard = 0;
    while block_norm(hi) > hi && guard < 200 {
        hi *= 2.0;
        guard += 1;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if block_norm(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    (0..kk)
        .map(|k| -s[k] * nu / (a[k] * nu + thr))
        .collect()
}

/// Residual correlations `S_k` (p x q each) of every coordinate at the given
/// state; the quantities behind the grid thresholds and the stationarity
/// conditions.
pub fn score_matrices(
    params: &MixtureParams,
    data: &Dataset,
    tau: &Responsibilities,
) -> Vec<DMatrix<f64>> {
    let moments = WeightedMoments::new(data, tau);
    let (p, q) = (params.p(), params.q());
    (0..params.k())
        .map(|k| {
            let gp = &moments.gram[k] * params.phi(k).transpose();
            DMatrix::from_fn(p, q, |j, m| {
                -params.p_diag(k)[m] * moments.xy[k][(j, m)] + gp[(j, m)]
                    - moments.gram[k][(j, j)] * params.phi(k)[(m, j)]
            })
        })
        .collect()
}

/// Penalized objective matching the configured penalty kind.
pub fn objective(params: &MixtureParams, data: &Dataset, config: &GemConfig) -> Result<f64> {
    match config.penalty {
        PenaltyKind::None => Ok(-log_likelihood(params, data)? / data.n() as f64),
        PenaltyKind::Lasso => penalized_objective(params, data, config.lambda),
        PenaltyKind::GroupLasso => {
            let ll = log_likelihood(params, data)?;
            let mut pen = 0.0;
            for m in 0..params.q() {
                for j in 0..params.p() {
                    let norm2: f64 = (0..params.k())
                        .map(|k| params.phi(k)[(m, j)].powi(2))
                        .sum();
                    pen += norm2.sqrt();
                }
            }
            Ok(-ll / data.n() as f64
                + config.lambda * (params.k() as f64).sqrt() * pen)
        }
    }
}

fn apply_restriction(params: &mut MixtureParams, restriction: Option<&SparsityPattern>) {
    let Some(pattern) = restriction else { return };
    for k in 0..params.k() {
        for m in 0..params.q() {
            for j in 0..params.p() {
                if !pattern.contains(m, j) {
                    params.phi_mut(k)[(m, j)] = 0.0;
                }
            }
        }
    }
}

const EMPTY_COMPONENT_FRACTION: f64 = 1e-8;
const PI_FLOOR: f64 = 1e-8;

/// Run GEM from explicit starting parameters (no randomness involved).
pub fn run_gem_from(data: &Dataset, init: &MixtureParams, config: &GemConfig) -> Result<GemFit> {
    config.validate()?;
    let lambda = config.effective_lambda();
    let mut params = init.clone();
    apply_restriction(&mut params, config.restriction.as_ref());
    let (n, q, p, kk) = (data.n(), data.q(), data.p(), params.k());
    let mut trace = vec![objective(&params, data, config)?];
    let mut converged = false;
    let mut flagged = false;

    for ite in 1..=config.max_iter {
        let tau = e_step(&params, data)?;
        let moments = WeightedMoments::new(data, &tau);
        let old = params.clone();

        let skip: Vec<bool> = moments
            .nk
            .iter()
            .map(|&v| v < EMPTY_COMPONENT_FRACTION * n as f64)
            .collect();
        if skip.iter().any(|&s| s) {
            flagged = true;
        }

        let penalty_weights: Vec<f64> = match config.penalty {
            PenaltyKind::Lasso => (0..kk).map(|k| lambda * params.phi_l1(k)).collect(),
            _ => vec![0.0; kk],
        };
        let (new_pi, _) = pi_update(params.pi(), &moments.nk, n, &penalty_weights, config);
        *params.pi_mut() = new_pi;
        if params.pi().iter().any(|&w| w < PI_FLOOR) {
            flagged = true;
            let floored: Vec<f64> = params.pi().iter().map(|&w| w.max(PI_FLOOR)).collect();
            let total: f64 = floored.iter().sum();
            *params.pi_mut() = floored.into_iter().map(|w| w / total).collect();
        }

        for k in 0..kk {
            if skip[k] {
                continue;
            }
            for m in 0..q {
                let v = p_update(&moments, &params, k, m)?;
                params.p_diag_mut(k)[m] = v;
            }
        }

        match config.penalty {
            PenaltyKind::None | PenaltyKind::Lasso => {
                for k in 0..kk {
                    if skip[k] {
                        continue;
                    }
                    for m in 0..q {
                        for j in 0..p {
                            let frozen = config
                                .restriction
                                .as_ref()
                                .is_some_and(|r| !r.contains(m, j));
                            let v = if frozen {
                                0.0
                            } else {
                                phi_coordinate_update(&moments, &params, k, m, j, lambda)
                            };
                            params.phi_mut(k)[(m, j)] = v;
                        }
                    }
                }
            }
            PenaltyKind::GroupLasso => {
                for m in 0..q {
                    for j in 0..p {
                        let frozen = config
                            .restriction
                            .as_ref()
                            .is_some_and(|r| !r.contains(m, j));
                        let block = if frozen {
                            vec![0.0; kk]
                        } else {
                            phi_group_update(&moments, &params, m, j, lambda)
                        };
                        for k in 0..kk {
                            if !skip[k] {
                                params.phi_mut(k)[(m, j)] = block[k];
                            }
                        }
                    }
                }
            }
        }

        let obj = objective(&params, data, config)?;
        let prev = *trace.last().unwrap();
        trace.push(obj);
        let rel_obj = (prev - obj).abs() / (1.0 + prev.abs());
        let rel_param = params.relative_change(&old);
        if ite >= config.min_iter && rel_obj < config.eps_loglik && rel_param < config.eps_param {
            converged = true;
            break;
        }
    }

    let tau = e_step(&params, data)?;
    Ok(GemFit {
        params,
        tau,
        objective_trace: trace,
        converged,
        flagged,
    })
}

/// Full estimation: seeded initialization followed by GEM to convergence.
pub fn run_gem(data: &Dataset, k: usize, config: &GemConfig) -> Result<GemFit> {
    let init = initialize(data, k, config)?;
    run_gem_from(data, &init, config)
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-task seed derivation.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    mix64(base ^ mix64(salt))
}

/// Seeded initialization: k-means on the concatenated rows `(x_i, y_i)`,
/// per-cluster ridge-stabilized least squares converted to `(pi, Phi, P)`,
/// then `init_iter` GEM iterations per start; the start with the highest
/// log-likelihood wins. The k-means step reseeds (bounded) when a cluster
/// empties.
pub fn initialize(data: &Dataset, k: usize, config: &GemConfig) -> Result<MixtureParams> {
    config.validate()?;
    if k == 0 || data.n() < k {
        return Err(Error::InvalidInput(format!(
            "cannot initialize {k} components from {} observations",
            data.n()
        )));
    }
    let (n, p, q) = (data.n(), data.p(), data.q());
    let mut points = DMatrix::zeros(n, p + q);
    for i in 0..n {
        for j in 0..p {
            points[(i, j)] = data.x()[(i, j)];
        }
        for m in 0..q {
            points[(i, p + m)] = data.y()[(i, m)];
        }
    }

    let mut best: Option<(f64, MixtureParams)> = None;
    let mut last_err: Option<Error> = None;
    for start in 0..config.n_init {
        let assign =
            kmeans_with_retries(&points, k, derive_seed(config.seed, start as u64))?;
        let mut params = least_squares_init(data, &assign, k)?;
        apply_restriction(&mut params, config.restriction.as_ref());

        let candidate = if config.init_iter > 0 {
            let short = config
                .clone()
                .with_iteration_limits(config.init_iter, config.init_iter);
            match run_gem_from(data, &params, &short) {
                Ok(fit) => fit.params,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            }
        } else {
            params
        };
        let ll = match log_likelihood(&candidate, data) {
            Ok(v) => v,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match &best {
            Some((best_ll, _)) if ll <= *best_ll => {}
            _ => best = Some((ll, candidate)),
        }
    }
    match best {
        Some((_, params)) => Ok(params),
        None => Err(last_err.unwrap_or_else(|| {
            Error::InitializationFailed("no start produced a usable fit".into())
        })),
    }
}

const KMEANS_RETRIES: u64 = 20;

fn kmeans_with_retries(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<Vec<usize>> {
    for attempt in 0..KMEANS_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt));
        if let Some(assign) = kmeans(points, k, &mut rng) {
            return Ok(assign);
        }
    }
    Err(Error::InitializationFailed(format!(
        "k-means produced an empty cluster on {KMEANS_RETRIES} consecutive starts"
    )))
}

/// Lloyd's algorithm seeded with k distinct observations; `None` when a
/// cluster empties (caller reseeds).
fn kmeans(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let n = points.nrows();
    let picks = rand::seq::index::sample(rng, n, k);
    let mut centers: Vec<DVector<f64>> = picks
        .iter()
        .map(|i| points.row(i).transpose())
        .collect();
    let mut assign = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let row = points.row(i).transpose();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = (&row - center).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                changed = true;
            }
            assign[i] = best;
            counts[best] += 1;
        }
        if counts.contains(&0) {
            return None;
        }
        if !changed {
            return Some(assign);
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let mut mean = DVector::zeros(points.ncols());
            for i in 0..n {
                if assign[i] == c {
                    mean += points.row(i).transpose();
                }
            }
            *center = mean / counts[c] as f64;
        }
    }
    Some(assign)
}

const INIT_RIDGE: f64 = 1e-8;
// A cluster smaller than the predictor count interpolates and reports a
// near-zero residual variance; floor it relative to the marginal variance of
// each response column so no start begins with an absurd precision.
const INIT_VARIANCE_FLOOR_FRACTION: f64 = 1e-3;

/// Per-cluster ridge-stabilized least squares plus residual variances,
/// converted to the `(pi, Phi, P)` parametrization. The ridge lives only
/// here, never inside GEM.
fn least_squares_init(data: &Dataset, assign: &[usize], k: usize) -> Result<MixtureParams> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    let column_floor: Vec<f64> = (0..q)
        .map(|m| {
            let col = data.y().column(m);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            (INIT_VARIANCE_FLOOR_FRACTION * var).max(1e-12)
        })
        .collect();
    let mut pi = Vec::with_capacity(k);
    let mut bs = Vec::with_capacity(k);
    let mut vars = Vec::with_capacity(k);
    for c in 0..k {
        let rows: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
        let nc = rows.len();
        if nc == 0 {
            return Err(Error::InitializationFailed("empty initial cluster".into()));
        }
        let mut xc = DMatrix::zeros(nc, p);
        let mut yc = DMatrix::zeros(nc, q);
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..p {
                xc[(r, j)] = data.x()[(i, j)];
            }
            for m in 0..q {
                yc[(r, m)] = data.y()[(i, m)];
            }
        }
        let mut xtx = xc.transpose() * &xc;
        let trace: f64 = (0..p).map(|j| xtx[(j, j)]).sum();
        let ridge = if trace > 0.0 {
            INIT_RIDGE * trace / p as f64
        } else {
            INIT_RIDGE
        };
        for j in 0..p {
            xtx[(j, j)] += ridge;
        }
        let xty = xc.transpose() * &yc;
        let coef = match nalgebra::Cholesky::new(xtx) {
            Some(chol) => chol.solve(&xty),
            None => {
                return Err(Error::InitializationFailed(
                    "singular normal equations despite ridge".into(),
                ))
            }
        };
        let resid = &yc - &xc * &coef;
        let var = DVector::from_iterator(
            q,
            (0..q).map(|m| (resid.column(m).norm_squared() / nc as f64).max(column_floor[m])),
        );
        pi.push(nc as f64 / n as f64);
        bs.push(coef.transpose());
        vars.push(var);
    }
    MixtureParams::from_regression(pi, bs, vars)
}

/// MAP partition implied by parameters on a dataset; convenience for
/// initialization quality checks.
pub fn map_partition(params: &MixtureParams, data: &Dataset) -> Result<Vec<usize>> {
    Ok(map_assign(&e_step(params, data)?))
}
