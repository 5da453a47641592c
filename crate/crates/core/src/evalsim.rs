//! Simulation generators and evaluation metrics: seeded benchmark designs,
//! analytic signal-to-noise, adjusted Rand index, Monte-Carlo
//! Kullback-Leibler divergence, support-recovery counts, prediction and MAPE.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{log_density, log_weights, log_sum_exp, Dataset, MixtureParams, SparsityPattern};

/// Number of supported couples in the benchmark designs: response
/// coordinates 1..=4 are explained by the matching predictor coordinates.
pub const SUPPORT_COUPLES: usize = 4;

/// A benchmark design: `y = B_Z x + eps` with standard Gaussian predictors,
/// `B_k` carrying `b_values[k]` on the first four diagonal couples and
/// `Sigma_k = sigma I_q`. `sigma` is a variance, not a standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimModelSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub b_values: Vec<f64>,
    pub sigma: f64,
    pub pi: Vec<f64>,
    pub seed: u64,
}

impl SimModelSpec {
    /// The five standard benchmark designs.
    pub fn model(id: usize, seed: u64) -> Result<Self> {
        let (n, p, q, b1, b2, sigma) = match id {
            1 => (2000, 10, 10, 3.0, -2.0, 1.0),
            2 => (100, 10, 10, 3.0, -2.0, 1.0),
            3 => (100, 10, 10, 3.0, -2.0, 3.0),
            4 => (100, 10, 10, 5.0, 3.0, 1.0),
            5 => (50, 30, 5, 3.0, -2.0, 1.0),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "benchmark model id {id} not in 1..=5"
                )))
            }
        };
        Ok(Self {
            n,
            p,
            q,
            k: 2,
            b_values: vec![b1, b2],
            sigma,
            pi: vec![0.5, 0.5],
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 || self.k == 0 {
            return Err(Error::InvalidInput("n, p, q, K must be positive".into()));
        }
        if self.p.min(self.q) < SUPPORT_COUPLES {
            return Err(Error::InvalidInput(format!(
                "the design places signal on {SUPPORT_COUPLES} diagonal couples; need min(p, q) >= {SUPPORT_COUPLES}"
            )));
        }
        if self.b_values.len() != self.k || self.pi.len() != self.k {
            return Err(Error::ShapeMismatch(
                "b_values and pi must have K entries".into(),
            ));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput("sigma must be positive".into()));
        }
        let s: f64 = self.pi.iter().sum();
        if self.pi.iter().any(|&w| !(w > 0.0)) || (s - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput("pi must be a positive simplex vector".into()));
        }
        Ok(())
    }

    /// Regression matrix of component `k`.
    pub fn regression_matrix(&self, k: usize) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.q, self.p);
        for m in 0..SUPPORT_COUPLES {
            b[(m, m)] = self.b_values[k];
        }
        b
    }

    /// Generating parameters in the `(pi, Phi, P)` parametrization.
    pub fn true_params(&self) -> Result<MixtureParams> {
        self.validate()?;
        let b: Vec<DMatrix<f64>> = (0..self.k).map(|k| self.regression_matrix(k)).collect();
        let vars = vec![DVector::from_element(self.q, self.sigma); self.k];
        MixtureParams::from_regression(self.pi.clone(), b, vars)
    }

    /// Supported couples of the design.
    pub fn true_pattern(&self) -> SparsityPattern {
        SparsityPattern::from_pairs((0..SUPPORT_COUPLES).map(|m| (m, m)).collect())
    }
}

/// Draw a labeled dataset from the design. Deterministic given the seed.
pub fn generate(spec: &SimModelSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b: Vec<DMatrix<f64>> = (0..spec.k).map(|k| spec.regression_matrix(k)).collect();
    let sd = spec.sigma.sqrt();
    let mut x = DMatrix::zeros(spec.n, spec.p);
    let mut y = DMatrix::zeros(spec.n, spec.q);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        for j in 0..spec.p {
            x[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
        let u: f64 = rng.random();
        let mut z = spec.k - 1;
        let mut acc = 0.0;
        for (k, &w) in spec.pi.iter().enumerate() {
            acc += w;
            if u < acc {
                z = k;
                break;
            }
        }
        labels.push(z + 1);
        let xi = x.row(i).transpose();
        let mean = &b[z] * xi;
        for m in 0..spec.q {
            y[(i, m)] = mean[m] + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new(x, y, Some(labels))
}

/// Analytic signal-to-noise ratio of a design:
/// `(s (E[B^2] + sigma) + (q - s) sigma) / (q sigma)` with `s` supported
/// couples and `E[B^2] = sum_k pi_k b_k^2`.
pub fn analytic_snr(spec: &SimModelSpec) -> f64 {
    let s = SUPPORT_COUPLES as f64;
    let e_b2: f64 = spec
        .pi
        .iter()
        .zip(&spec.b_values)
        .map(|(&w, &b)| w * b * b)
        .sum();
    (s * (e_b2 + spec.sigma) + (spec.q as f64 - s) * spec.sigma) / (spec.q as f64 * spec.sigma)
}

/// Adjusted Rand index between two partitions (pair counting, adjusted for
/// chance). Invariant under relabeling; 1 iff the partitions coincide.
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::ShapeMismatch(format!(
            "partitions of length {} and {}",
            labels_a.len(),
            labels_b.len()
        )));
    }
    if labels_a.len() < 2 {
        return Err(Error::InvalidInput("need at least two observations".into()));
    }
    use std::collections::BTreeMap;
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let choose2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(labels_a.len() as u64);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        // Both partitions degenerate in the same way.
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / (max - expected))
}

/// Monte-Carlo Kullback-Leibler estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct KlEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub rejected: usize,
}

/// Conditional KL divergence of the fitted density from the generating one,
/// averaged over a standard Gaussian predictor design.
pub fn kl_mc(
    truth: &MixtureParams,
    fitted: &MixtureParams,
    n_mc: usize,
    seed: u64,
) -> Result<KlEstimate> {
    let p = truth.p();
    kl_mc_with_sampler(
        truth,
        fitted,
        |rng| DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal)),
        n_mc,
        seed,
    )
}

/// Conditional KL divergence with an explicit predictor sampler; the
/// responses are drawn from the generating mixture at each sampled `x`.
/// Samples with a non-finite log ratio are rejected and counted; more than
/// 0.1% rejections is an error.
pub fn kl_mc_with_sampler<F>(
    truth: &MixtureParams,
    fitted: &MixtureParams,
    mut x_sampler: F,
    n_mc: usize,
    seed: u64,
) -> Result<KlEstimate>
where
    F: FnMut(&mut ChaCha8Rng) -> DVector<f64>,
{
    if n_mc < 1000 {
        return Err(Error::InvalidInput("need n_mc >= 1000".into()));
    }
    if truth.p() != fitted.p() || truth.q() != fitted.q() {
        return Err(Error::ShapeMismatch(
            "truth and fitted models disagree on p or q".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b: Vec<DMatrix<f64>> = (0..truth.k()).map(|k| truth.regression_matrix(k)).collect();
    let q = truth.q();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    for _ in 0..n_mc {
        let x = x_sampler(&mut rng);
        let u: f64 = rng.random();
        let mut z = truth.k() - 1;
        let mut acc = 0.0;
        for (k, &w) in truth.pi().iter().enumerate() {
            acc += w;
            if u < acc {
                z = k;
                break;
            }
        }
        let mean = &b[z] * &x;
        let y = DVector::from_fn(q, |m, _| {
            mean[m] + rng.sample::<f64, _>(StandardNormal) / truth.p_diag(z)[m]
        });
        let ratio = log_density(truth, &x, &y)? - log_density(fitted, &x, &y)?;
        if ratio.is_finite() {
            sum += ratio;
            sum_sq += ratio * ratio;
            accepted += 1;
        } else {
            rejected += 1;
        }
    }
    if (rejected as f64) > 0.001 * n_mc as f64 {
        return Err(Error::Numerical(format!(
            "{rejected} of {n_mc} Monte-Carlo samples had non-finite log ratios"
        )));
    }
    let m = sum / accepted as f64;
    let var = (sum_sq / accepted as f64 - m * m).max(0.0);
    Ok(KlEstimate {
        estimate: m,
        std_error: (var / accepted as f64).sqrt(),
        rejected,
    })
}

/// True / false relevant couple counts of a fitted pattern against the
/// generating one, counted once per component: a recovered couple counts
/// `K` (the truth is nonzero in every component), and so does a false one.
pub fn count_tr_fr(
    j_hat: &SparsityPattern,
    j_true: &SparsityPattern,
    k: usize,
) -> (usize, usize) {
    let mut tr = 0;
    let mut fr = 0;
    for (m, j) in j_hat.iter() {
        if j_true.contains(m, j) {
            tr += k;
        } else {
            fr += k;
        }
    }
    (tr, fr)
}

/// Prediction mode: hard component choice or posterior mixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    Map,
    Mix,
}

/// Predict a response at `x`. Component weights are the posterior
/// responsibilities when the observed response `y` is supplied (the test-set
/// protocol), the marginal mixture weights otherwise. `mu_hat` is added back
/// when the responses were centered upstream.
pub fn predict(
    params: &MixtureParams,
    x: &DVector<f64>,
    mode: PredictMode,
    y: Option<&DVector<f64>>,
    mu_hat: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    if x.len() != params.p() {
        return Err(Error::ShapeMismatch("x length differs from p".into()));
    }
    let weights: Vec<f64> = match y {
        Some(resp) => {
            if resp.len() != params.q() {
                return Err(Error::ShapeMismatch("y length differs from q".into()));
            }
            let w = log_weights(params, x, resp);
            let lse = log_sum_exp(&w);
            w.iter().map(|&v| (v - lse).exp()).collect()
        }
        None => params.pi().to_vec(),
    };
    let mut out = DVector::zeros(params.q());
    match mode {
        PredictMode::Mix => {
            for k in 0..params.k() {
                out += params.regression_matrix(k) * x * weights[k];
            }
        }
        PredictMode::Map => {
            let mut best = 0;
            for k in 1..params.k() {
                if weights[k] > weights[best] {
                    best = k;
                }
            }
            out = params.regression_matrix(best) * x;
        }
    }
    if let Some(mu) = mu_hat {
        if mu.len() != params.q() {
            return Err(Error::ShapeMismatch("mu_hat length differs from q".into()));
        }
        out += mu;
    }
    Ok(out)
}

/// Mean absolute percentage error. Entries with a zero true value are
/// excluded; the count of exclusions is returned alongside.
pub fn mape(y_hat: &[f64], y_true: &[f64]) -> Result<(f64, usize)> {
    if y_hat.len() != y_true.len() {
        return Err(Error::ShapeMismatch("prediction/target length mismatch".into()));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (&h, &t) in y_hat.iter().zip(y_true) {
        if t == 0.0 {
            excluded += 1;
        } else {
            sum += ((h - t) / t).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput(
            "every true value is zero; MAPE undefined".into(),
        ));
    }
    Ok((sum / used as f64, excluded))
}

/// Functional benchmark: noisy cosines on a uniform grid, with the response
/// function equal to the predictor function or its negative depending on the
/// cluster, plus fresh white noise.
#[derive(Debug, Clone)]
pub struct CosineMixtureSpec {
    pub n: usize,
    pub grid_len: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CosineMixtureSpec {
    fn default() -> Self {
        Self {
            n: 100,
            grid_len: 15,
            noise_sd: 0.1,
            seed: 0,
        }
    }
}

/// Returns the predictor functions, the response functions (both n x T) and
/// the 1-based cluster labels.
pub fn generate_cosine_mixture(spec: &CosineMixtureSpec) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.grid_len;
    let mut f = DMatrix::zeros(spec.n, t);
    let mut g = DMatrix::zeros(spec.n, t);
    let mut labels = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        for j in 0..t {
            let tj = j as f64 / (t - 1).max(1) as f64;
            f[(i, j)] = (2.0 * std::f64::consts::PI * tj).cos()
                + spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
        let u: f64 = rng.random();
        let (label, sign) = if u < 0.5 { (1, 1.0) } else { (2, -1.0) };
        labels.push(label);
        for j in 0..t {
            g[(i, j)] = sign * f[(i, j)] + spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    (f, g, labels)
}
