//! Model selection over fitted collections: slope heuristic with a robust
//! line fit on the large-dimension regime, BIC as a comparator, and an oracle
//! selector for simulations where the generating density is known.

use crate::error::{Error, Result};
use crate::evalsim::kl_mc;
use crate::model::{MixtureParams, ModelSpec};

/// Where a collection entry came from.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub procedure: String,
    pub k: usize,
    pub lambda: Option<f64>,
    pub ranks: Option<Vec<usize>>,
}

/// A collection of fitted models with unique `(K, J, R)` keys, all fitted on
/// the same `n` observations.
#[derive(Debug, Clone, Default)]
pub struct ModelCollection {
    entries: Vec<ModelSpec>,
    provenance: Vec<Provenance>,
    n: usize,
}

impl ModelCollection {
    pub fn new(n: usize) -> Self {
        Self {
            entries: Vec::new(),
            provenance: Vec::new(),
            n,
        }
    }

    /// Insert a fitted model; returns false (and drops it) when the
    /// `(K, J, R)` key is already present.
    pub fn insert(&mut self, spec: ModelSpec, provenance: Provenance) -> bool {
        let duplicate = self.entries.iter().any(|e| {
            e.k == spec.k && e.pattern == spec.pattern && e.ranks == spec.ranks
        });
        if duplicate {
            return false;
        }
        self.entries.push(spec);
        self.provenance.push(provenance);
        true
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ModelSpec] {
        &self.entries
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn distinct_dimensions(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.entries.iter().map(|e| e.dim).collect();
        dims.sort_unstable();
        dims.dedup();
        dims
    }
}

/// One point of the slope graph: a distinct dimension with the best
/// log-likelihood attained at that dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePoint {
    pub dim: usize,
    pub dim_over_n: f64,
    pub loglik_over_n: f64,
}

/// Diagnostics of a slope-heuristic selection, exportable for plotting.
#[derive(Debug, Clone)]
pub struct SlopeDiagnostics {
    pub points: Vec<SlopePoint>,
    pub kappa: f64,
    pub intercept: f64,
    /// Number of largest-dimension points used by the line fit.
    pub window: usize,
    /// True when kappa was non-positive and the selection fell back to BIC.
    pub bic_fallback: bool,
}

/// Slope-graph points: per distinct dimension, the maximum log-likelihood
/// over the collection, scaled by n.
pub fn slope_points(collection: &ModelCollection) -> Vec<SlopePoint> {
    let n = collection.n() as f64;
    let mut best: Vec<(usize, f64)> = Vec::new();
    for e in collection.entries() {
        match best.iter_mut().find(|(d, _)| *d == e.dim) {
            Some((_, ll)) => *ll = ll.max(e.loglik),
            None => best.push((e.dim, e.loglik)),
        }
    }
    best.sort_by_key(|&(d, _)| d);
    best.into_iter()
        .map(|(dim, loglik)| SlopePoint {
            dim,
            dim_over_n: dim as f64 / n,
            loglik_over_n: loglik / n,
        })
        .collect()
}

const MIN_SLOPE_POINTS: usize = 5;

/// Select by the slope heuristic: fit a robust line to the large-dimension
/// half of the slope graph, read the slope `kappa`, and minimize
/// `-loglik/n + 2 kappa D/n` over the whole collection. Ties go to the
/// smaller dimension, then the smaller component count. A non-positive
/// fitted slope invalidates the heuristic; selection falls back to BIC and
/// says so in the diagnostics.
pub fn slope_select(
    collection: &ModelCollection,
) -> Result<(ModelSpec, f64, SlopeDiagnostics)> {
    if collection.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let points = slope_points(collection);
    if points.len() < MIN_SLOPE_POINTS {
        return Err(Error::InsufficientCollection {
            got: points.len(),
            need: MIN_SLOPE_POINTS,
        });
    }
    let window = (points.len().div_ceil(2)).max(MIN_SLOPE_POINTS).min(points.len());
    let tail = &points[points.len() - window..];
    let xy: Vec<(f64, f64)> = tail
        .iter()
        .map(|p| (p.dim_over_n, p.loglik_over_n))
        .collect();
    let (intercept, kappa) = lad_line(&xy);

    if kappa <= 0.0 {
        let chosen = bic_select(collection)?;
        return Ok((
            chosen,
            kappa,
            SlopeDiagnostics {
                points,
                kappa,
                intercept,
                window,
                bic_fallback: true,
            },
        ));
    }

    let n = collection.n() as f64;
    let chosen = argmin_by_criterion(collection, |e| {
        -e.loglik / n + 2.0 * kappa * e.dim as f64 / n
    })?;
    Ok((
        chosen,
        kappa,
        SlopeDiagnostics {
            points,
            kappa,
            intercept,
            window,
            bic_fallback: false,
        },
    ))
}

/// BIC selection: minimize `-2 loglik + D ln n`, same tie-breaks as the
/// slope heuristic.
pub fn bic_select(collection: &ModelCollection) -> Result<ModelSpec> {
    let n = collection.n() as f64;
    argmin_by_criterion(collection, |e| -2.0 * e.loglik + e.dim as f64 * n.ln())
}

/// Oracle selection on simulated data: minimize the Monte-Carlo
/// Kullback-Leibler divergence against the generating conditional density.
/// Every entry is scored with the same seed (common random numbers). Returns
/// the chosen model and the per-entry KL estimates in collection order.
pub fn oracle_select(
    collection: &ModelCollection,
    truth: &MixtureParams,
    n_mc: usize,
    seed: u64,
) -> Result<(ModelSpec, Vec<f64>)> {
    if collection.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let mut kls = Vec::with_capacity(collection.len());
    for e in collection.entries() {
        kls.push(kl_mc(truth, &e.params, n_mc, seed)?.estimate);
    }
    let mut order: Vec<usize> = (0..collection.len()).collect();
    order.sort_by(|&a, &b| {
        let ea = &collection.entries()[a];
        let eb = &collection.entries()[b];
        kls[a]
            .total_cmp(&kls[b])
            .then(ea.dim.cmp(&eb.dim))
            .then(ea.k.cmp(&eb.k))
            .then(ea.pattern.cmp(&eb.pattern))
            .then(ea.ranks.cmp(&eb.ranks))
    });
    Ok((collection.entries()[order[0]].clone(), kls))
}

fn argmin_by_criterion<F: Fn(&ModelSpec) -> f64>(
    collection: &ModelCollection,
    criterion: F,
) -> Result<ModelSpec> {
    collection
        .entries()
        .iter()
        .min_by(|a, b| {
            criterion(a)
                .total_cmp(&criterion(b))
                .then(a.dim.cmp(&b.dim))
                .then(a.k.cmp(&b.k))
                .then(a.pattern.cmp(&b.pattern))
                .then(a.ranks.cmp(&b.ranks))
        })
        .cloned()
        .ok_or(Error::EmptyCollection)
}

/// Least-absolute-deviations line through `(x, y)` points via iteratively
/// reweighted least squares. Returns `(intercept, slope)`.
fn lad_line(points: &[(f64, f64)]) -> (f64, f64) {
    let mut weights = vec![1.0; points.len()];
    let (mut a, mut b) = weighted_ls(points, &weights);
    for _ in 0..50 {
        for (w, &(x, y)) in weights.iter_mut().zip(points) {
            let r = (y - a - b * x).abs();
            *w = 1.0 / r.max(1e-10);
        }
        let (na, nb) = weighted_ls(points, &weights);
        let delta = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        if delta < 1e-10 {
            break;
        }
    }
    (a, b)
}

fn weighted_ls(points: &[(f64, f64)], weights: &[f64]) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&(x, y), &w) in points.iter().zip(weights) {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return (sy / sw.max(1e-300), 0.0);
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    (intercept, slope)
}
