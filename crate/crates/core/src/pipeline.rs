//! Collection construction for the four procedures: an l1 path discovers
//! candidate supports, each support is refitted unpenalized (and optionally
//! expanded into a rank subcollection). The result is a `ModelCollection`
//! ready for selection.
//!
//! Per component count K: one unpenalized fit seeds both the data-driven
//! regularization grid and the warm starts of every path fit; refits are
//! warm-started from the path solution that discovered their support. All
//! fan-out is over independent tasks merged by task order, so the output is
//! identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gem::{
    derive_seed, run_gem, run_gem_from, score_matrices, GemConfig, PenaltyKind,
};
use crate::grid::{extract_pattern, lambda_values_from_scores, thin_grid, DEFAULT_PATTERN_TOL};
use crate::model::{log_likelihood, model_dimension, Dataset, MixtureParams, ModelSpec, SparsityPattern};
use crate::rank::{enumerate_rank_vectors, rank_refit};
use crate::selection::{ModelCollection, Provenance};

/// The four model-collection procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Procedure {
    LassoMle,
    LassoRank,
    GroupLassoMle,
    GroupLassoRank,
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Procedure::LassoMle => "lasso-mle",
            Procedure::LassoRank => "lasso-rank",
            Procedure::GroupLassoMle => "group-lasso-mle",
            Procedure::GroupLassoRank => "group-lasso-rank",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lasso-mle" => Ok(Procedure::LassoMle),
            "lasso-rank" => Ok(Procedure::LassoRank),
            "group-lasso-mle" => Ok(Procedure::GroupLassoMle),
            "group-lasso-rank" => Ok(Procedure::GroupLassoRank),
            other => Err(Error::InvalidInput(format!("unknown procedure {other}"))),
        }
    }

    pub fn is_rank(&self) -> bool {
        matches!(self, Procedure::LassoRank | Procedure::GroupLassoRank)
    }

    pub fn penalty(&self) -> PenaltyKind {
        match self {
            Procedure::LassoMle | Procedure::LassoRank => PenaltyKind::Lasso,
            Procedure::GroupLassoMle | Procedure::GroupLassoRank => PenaltyKind::GroupLasso,
        }
    }
}

/// Options of a collection build.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub procedure: Procedure,
    pub k_min: usize,
    pub k_max: usize,
    /// Grid size after thinning.
    pub lambda_count: usize,
    /// Cap on enumerated ranks for the rank procedures.
    pub r_max: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Base GEM tuning; seed, penalty, lambda and restriction are managed
    /// per stage by the pipeline.
    pub gem: GemConfig,
}

impl FitOptions {
    pub fn new(procedure: Procedure) -> Self {
        Self {
            procedure,
            k_min: 2,
            k_max: 5,
            lambda_count: 20,
            r_max: None,
            workers: None,
            gem: GemConfig::default(),
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .expect("worker pool")
            .install(f),
        _ => f(),
    }
}

/// Build the model collection of the chosen procedure over the component
/// range. Deterministic given the seed, independent of the worker count.
pub fn fit_collection(data: &Dataset, opts: &FitOptions) -> Result<ModelCollection> {
    if opts.k_min == 0 || opts.k_min > opts.k_max {
        return Err(Error::InvalidInput(
            "need 1 <= k_min <= k_max".into(),
        ));
    }
    with_pool(opts.workers, || build_collection(data, opts))
}

fn build_collection(data: &Dataset, opts: &FitOptions) -> Result<ModelCollection> {
    let mut collection = ModelCollection::new(data.n());
    let q = data.q();
    for k in opts.k_min..=opts.k_max {
        let base = opts
            .gem
            .clone()
            .with_seed(derive_seed(opts.gem.seed, k as u64))
            .with_restriction(None);

        let mle_cfg = base
            .clone()
            .with_lambda(0.0)
            .with_penalty(PenaltyKind::None);
        let mle = run_gem(data, k, &mle_cfg)?;
        let scores = score_matrices(&mle.params, data, &mle.tau);
        let grid_full =
            lambda_values_from_scores(&scores, mle.params.pi(), data.n(), opts.procedure.penalty());
        let grid = thin_grid(&grid_full, opts.lambda_count);

        let path: Vec<(f64, SparsityPattern, MixtureParams)> = grid
            .par_iter()
            .map(|&lambda| {
                let cfg = base
                    .clone()
                    .with_lambda(lambda)
                    .with_penalty(opts.procedure.penalty());
                let fit = run_gem_from(data, &mle.params, &cfg)?;
                let pattern = extract_pattern(&fit.params, DEFAULT_PATTERN_TOL);
                Ok((lambda, pattern, fit.params))
            })
            .collect::<Result<_>>()?;

        // Distinct supports, keeping the smallest discovering lambda.
        let mut supports: Vec<(SparsityPattern, f64, MixtureParams)> = Vec::new();
        for (lambda, pattern, params) in path {
            if !supports.iter().any(|(p, _, _)| *p == pattern) {
                supports.push((pattern, lambda, params));
            }
        }

        let refits: Vec<(f64, ModelSpec)> = supports
            .par_iter()
            .map(|(pattern, lambda, warm)| {
                let cfg = base
                    .clone()
                    .with_lambda(0.0)
                    .with_penalty(PenaltyKind::None)
                    .with_restriction(Some(pattern.clone()));
                let fit = run_gem_from(data, warm, &cfg)?;
                let loglik = log_likelihood(&fit.params, data)?;
                Ok((
                    *lambda,
                    ModelSpec {
                        k,
                        pattern: pattern.clone(),
                        ranks: None,
                        params: fit.params,
                        loglik,
                        dim: model_dimension(k, pattern.len(), q),
                        converged: fit.converged,
                    },
                ))
            })
            .collect::<Result<_>>()?;

        if opts.procedure.is_rank() {
            let rank_jobs: Vec<(usize, Vec<usize>)> = refits
                .iter()
                .enumerate()
                .filter(|(_, (_, spec))| !spec.pattern.is_empty())
                .flat_map(|(idx, (_, spec))| {
                    enumerate_rank_vectors(k, &spec.pattern, q, opts.r_max)
                        .into_iter()
                        .map(move |ranks| (idx, ranks))
                })
                .collect();
            let rank_specs: Vec<ModelSpec> = rank_jobs
                .par_iter()
                .map(|(idx, ranks)| {
                    let (_, spec) = &refits[*idx];
                    rank_refit(data, k, &spec.pattern, ranks, &spec.params, &base)
                })
                .collect::<Result<_>>()?;
            for ((idx, ranks), spec) in rank_jobs.into_iter().zip(rank_specs) {
                let lambda = refits[idx].0;
                collection.insert(
                    spec,
                    Provenance {
                        procedure: opts.procedure.name().into(),
                        k,
                        lambda: Some(lambda),
                        ranks: Some(ranks),
                    },
                );
            }
        } else {
            for (lambda, spec) in refits {
                collection.insert(
                    spec,
                    Provenance {
                        procedure: opts.procedure.name().into(),
                        k,
                        lambda: Some(lambda),
                        ranks: None,
                    },
                );
            }
        }
    }
    if collection.is_empty() {
        return Err(Error::EmptyCollection);
    }
    Ok(collection)
}
