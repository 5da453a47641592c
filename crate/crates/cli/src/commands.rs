//! The five subcommands: simulate, fit, select, evaluate, wavelet.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use mixreg::evalsim::{
    analytic_snr, ari, count_tr_fr, generate, generate_cosine_mixture, kl_mc, mape, predict,
    CosineMixtureSpec, PredictMode, SimModelSpec,
};
use mixreg::gem::GemConfig;
use mixreg::grid::{extract_pattern, DEFAULT_PATTERN_TOL};
use mixreg::model::{map_assign, Dataset};
use mixreg::gem::e_step;
use mixreg::pipeline::{fit_collection, FitOptions, Procedure};
use mixreg::selection::{bic_select, slope_points, slope_select};
use mixreg::wavelet::{
    idwt, project_dataset, project_dataset_centered, reconstruct_representative, WaveletBasis,
    WaveletCoeffs, WaveletFamily,
};
use mixreg::{Error, Result};

use crate::io::{
    read_dataset_csv, read_functional_csv, read_json, read_model_record, write_dataset_csv,
    write_functional_csv, write_json, write_slope_points_csv, CollectionFile, FitManifest,
    GemSettings, ModelRecord, SelectManifest, SelectedFile, SlopeDiagnosticsDto, SCHEMA_VERSION,
};

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)
        .map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Benchmark design id (1..=5).
    #[arg(long, conflicts_with = "spec")]
    pub model: Option<usize>,
    /// Custom design as a JSON file with the SimModelSpec fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateManifest {
    schema_version: u32,
    command: String,
    config: SimulateConfig,
    spec: SimSpecDto,
    analytic_snr: f64,
    format: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateConfig {
    model: Option<usize>,
    spec_file: Option<String>,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpecDto {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub b_values: Vec<f64>,
    pub sigma: f64,
    pub pi: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl SimSpecDto {
    fn to_spec(&self, seed: u64) -> SimModelSpec {
        SimModelSpec {
            n: self.n,
            p: self.p,
            q: self.q,
            k: self.k,
            b_values: self.b_values.clone(),
            sigma: self.sigma,
            pi: self.pi.clone(),
            seed,
        }
    }

    fn from_spec(spec: &SimModelSpec) -> Self {
        Self {
            n: spec.n,
            p: spec.p,
            q: spec.q,
            k: spec.k,
            b_values: spec.b_values.clone(),
            sigma: spec.sigma,
            pi: spec.pi.clone(),
            seed: spec.seed,
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push_str(".manifest.json");
    out.with_file_name(name)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = match (&args.model, &args.spec) {
        (Some(id), None) => SimModelSpec::model(*id, args.seed)?,
        (None, Some(path)) => read_json::<SimSpecDto>(path)?.to_spec(args.seed),
        _ => {
            return Err(Error::InvalidInput(
                "pass exactly one of --model or --spec".into(),
            ))
        }
    };
    let data = generate(&spec)?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write_dataset_csv(&args.out, &data)?;
    let manifest = SimulateManifest {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        config: SimulateConfig {
            model: args.model,
            spec_file: args.spec.as_ref().map(|p| p.display().to_string()),
            seed: args.seed,
        },
        spec: SimSpecDto::from_spec(&spec),
        analytic_snr: analytic_snr(&spec),
        format: "csv:x1..xp,y1..yq,label".into(),
    };
    write_json(&manifest_path(&args.out), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// fit

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// lasso-mle | lasso-rank | group-lasso-mle | group-lasso-rank
    #[arg(long)]
    pub procedure: String,
    #[arg(long, default_value_t = 2)]
    pub kmin: usize,
    #[arg(long, default_value_t = 5)]
    pub kmax: usize,
    /// Regularization grid size after thinning.
    #[arg(long, default_value_t = 20)]
    pub lambda_count: usize,
    /// Cap on enumerated ranks (rank procedures only).
    #[arg(long)]
    pub rmax: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the fit fan-out.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub n_init: usize,
    #[arg(long, default_value_t = 10)]
    pub init_iter: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let data = read_dataset_csv(&args.data)?;
    let procedure = Procedure::parse(&args.procedure)?;
    let gem = GemConfig::default()
        .with_seed(args.seed)
        .with_starts(args.n_init, args.init_iter)
        .with_iteration_limits(10.min(args.max_iter), args.max_iter);
    let opts = FitOptions {
        procedure,
        k_min: args.kmin,
        k_max: args.kmax,
        lambda_count: args.lambda_count,
        r_max: args.rmax,
        workers: args.workers,
        gem: gem.clone(),
    };
    let collection = fit_collection(&data, &opts)?;
    ensure_dir(&args.out_dir)?;
    let manifest = FitManifest {
        data: args.data.display().to_string(),
        procedure: procedure.name().into(),
        kmin: args.kmin,
        kmax: args.kmax,
        lambda_count: args.lambda_count,
        rmax: args.rmax,
        seed: args.seed,
        gem: GemSettings::from(&gem),
    };
    let file = CollectionFile::from_collection(manifest, &collection);
    write_json(&args.out_dir.join("collection.json"), &file)?;
    write_slope_points_csv(
        &args.out_dir.join("slope_points.csv"),
        &slope_points(&collection),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// select

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub collection: PathBuf,
    /// slope | bic
    #[arg(long, default_value = "slope")]
    pub criterion: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_select(args: &SelectArgs) -> Result<()> {
    let file: CollectionFile = read_json(&args.collection)?;
    let collection = file.to_collection()?;
    let (chosen, kappa, diagnostics) = match args.criterion.as_str() {
        "slope" => {
            let (chosen, kappa, diag) = slope_select(&collection)?;
            (chosen, Some(kappa), Some(SlopeDiagnosticsDto::from(&diag)))
        }
        "bic" => (bic_select(&collection)?, None, None),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown criterion {other} (expected slope or bic)"
            )))
        }
    };
    let idx = collection
        .entries()
        .iter()
        .position(|e| *e == chosen)
        .expect("chosen model comes from the collection");
    let record = ModelRecord::from_spec(&chosen, &collection.provenance()[idx]);
    let out = SelectedFile {
        schema_version: SCHEMA_VERSION,
        command: "select".into(),
        config: SelectManifest {
            collection: args.collection.display().to_string(),
            criterion: args.criterion.clone(),
        },
        kappa_hat: kappa,
        diagnostics,
        model: record,
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write_json(&args.out, &out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A selection output or bare model record JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Benchmark id whose generator is the ground truth (for KL and TR/FR).
    #[arg(long, conflicts_with = "truth_spec")]
    pub truth_model: Option<usize>,
    /// Custom generator spec JSON as ground truth.
    #[arg(long)]
    pub truth_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    pub kl_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub kl_seed: u64,
    /// Wavelet manifest of the projected dataset; when given, cluster
    /// representative curves are reconstructed from the relevant
    /// coefficients.
    #[arg(long)]
    pub wavelet_manifest: Option<PathBuf>,
    /// Responsibility cutoff for membership in a representative.
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Also write the metrics as a single CSV row (with header), ready to be
    /// concatenated across seeds and procedures for summary plots.
    #[arg(long)]
    pub row_out: Option<PathBuf>,
    /// Free-form label copied into the report and the metric row (e.g. the
    /// experiment seed).
    #[arg(long)]
    pub tag: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub schema_version: u32,
    pub command: String,
    pub config: EvaluateConfig,
    pub tag: Option<String>,
    /// Identity of the evaluated model.
    pub procedure: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub dim: usize,
    pub metrics: Metrics,
    /// Path of the cluster-representative CSV, when wavelet metadata was
    /// supplied.
    pub representatives: Option<String>,
    pub notices: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluateConfig {
    pub model: String,
    pub data: String,
    pub truth_model: Option<usize>,
    pub truth_spec: Option<String>,
    pub kl_samples: usize,
    pub kl_seed: u64,
    pub wavelet_manifest: Option<String>,
    pub threshold: f64,
    pub row_out: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub ari: Option<f64>,
    pub kl: Option<f64>,
    pub kl_std_error: Option<f64>,
    pub tr: Option<usize>,
    pub fr: Option<usize>,
    pub mape_map: Option<f64>,
    pub mape_mix: Option<f64>,
    pub mape_excluded: Option<usize>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let record = read_model_record(&args.model)?;
    let (spec, _) = record.to_spec()?;
    let data = read_dataset_csv(&args.data)?;
    let mut notices = Vec::new();

    let truth = match (&args.truth_model, &args.truth_spec) {
        (Some(id), None) => Some(SimModelSpec::model(*id, 0)?),
        (None, Some(path)) => Some(read_json::<SimSpecDto>(path)?.to_spec(0)),
        (None, None) => None,
        _ => unreachable!("clap conflicts_with"),
    };

    let ari_value = match data.labels() {
        Some(labels) => {
            let tau = e_step(&spec.params, &data)?;
            Some(ari(&map_assign(&tau), labels)?)
        }
        None => {
            notices.push("dataset has no label column; ARI omitted".into());
            None
        }
    };

    let (kl_value, kl_se, tr, fr) = match &truth {
        Some(truth_spec) => {
            let truth_params = truth_spec.true_params()?;
            let est = kl_mc(&truth_params, &spec.params, args.kl_samples, args.kl_seed)?;
            let fitted_pattern = extract_pattern(&spec.params, DEFAULT_PATTERN_TOL);
            let (tr, fr) = count_tr_fr(&fitted_pattern, &truth_spec.true_pattern(), truth_spec.k);
            (Some(est.estimate), Some(est.std_error), Some(tr), Some(fr))
        }
        None => {
            notices.push("no ground-truth generator given; KL and TR/FR omitted".into());
            (None, None, None, None)
        }
    };

    // Prediction error on the provided data, using the observed responses to
    // weight components (test-set protocol); both prediction modes reported.
    let mut flat_true = Vec::new();
    let mut flat_map = Vec::new();
    let mut flat_mix = Vec::new();
    for i in 0..data.n() {
        let x = data.x_row(i);
        let y = data.y_row(i);
        let hat_map = predict(&spec.params, &x, PredictMode::Map, Some(&y), None)?;
        let hat_mix = predict(&spec.params, &x, PredictMode::Mix, Some(&y), None)?;
        for m in 0..data.q() {
            flat_true.push(y[m]);
            flat_map.push(hat_map[m]);
            flat_mix.push(hat_mix[m]);
        }
    }
    let (mape_map_v, mape_mix_v, excluded) = match (
        mape(&flat_map, &flat_true),
        mape(&flat_mix, &flat_true),
    ) {
        (Ok((a, ex)), Ok((b, _))) => {
            if ex > 0 {
                notices.push(format!("{ex} zero-valued responses excluded from MAPE"));
            }
            (Some(a), Some(b), Some(ex))
        }
        _ => {
            notices.push("all responses are zero; MAPE omitted".into());
            (None, None, None)
        }
    };

    let representatives = match &args.wavelet_manifest {
        Some(manifest_file) => Some(write_representatives(
            args,
            manifest_file,
            &spec,
            &data,
            &mut notices,
        )?),
        None => None,
    };

    let report = EvaluateReport {
        schema_version: SCHEMA_VERSION,
        command: "evaluate".into(),
        config: EvaluateConfig {
            model: args.model.display().to_string(),
            data: args.data.display().to_string(),
            truth_model: args.truth_model,
            truth_spec: args.truth_spec.as_ref().map(|p| p.display().to_string()),
            kl_samples: args.kl_samples,
            kl_seed: args.kl_seed,
            wavelet_manifest: args
                .wavelet_manifest
                .as_ref()
                .map(|p| p.display().to_string()),
            threshold: args.threshold,
            row_out: args.row_out.as_ref().map(|p| p.display().to_string()),
        },
        tag: args.tag.clone(),
        procedure: record.procedure.clone(),
        k: spec.k,
        dim: spec.dim,
        metrics: Metrics {
            ari: ari_value,
            kl: kl_value,
            kl_std_error: kl_se,
            tr,
            fr,
            mape_map: mape_map_v,
            mape_mix: mape_mix_v,
            mape_excluded: excluded,
        },
        representatives,
        notices,
    };
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            ensure_dir(dir)?;
        }
    }
    write_json(&args.out, &report)?;
    if let Some(row_path) = &args.row_out {
        write_metric_row(row_path, &report)?;
    }
    Ok(())
}

/// One metric row per evaluation, ready for concatenation across seeds and
/// procedures.
fn write_metric_row(path: &Path, report: &EvaluateReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::InvalidInput(format!("open metric row csv: {e}")))?;
    w.write_record([
        "tag",
        "procedure",
        "K",
        "dim",
        "ari",
        "kl",
        "kl_std_error",
        "tr",
        "fr",
        "mape_map",
        "mape_mix",
    ])
    .map_err(|e| Error::InvalidInput(format!("write header: {e}")))?;
    let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_u = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let m = &report.metrics;
    w.write_record([
        report.tag.clone().unwrap_or_default(),
        report.procedure.clone(),
        report.k.to_string(),
        report.dim.to_string(),
        opt_f(m.ari),
        opt_f(m.kl),
        opt_f(m.kl_std_error),
        opt_u(m.tr),
        opt_u(m.fr),
        opt_f(m.mape_map),
        opt_f(m.mape_mix),
    ])
    .map_err(|e| Error::InvalidInput(format!("write row: {e}")))?;
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("flush metric row csv: {e}")))?;
    Ok(())
}

/// Reconstruct one representative curve per component from the relevant
/// predictor coefficients, averaging the observations whose responsibility
/// exceeds the threshold. Components nobody clears are skipped with a notice.
fn write_representatives(
    args: &EvaluateArgs,
    manifest_file: &Path,
    spec: &mixreg::model::ModelSpec,
    data: &Dataset,
    notices: &mut Vec<String>,
) -> Result<String> {
    let manifest: WaveletManifest = read_json(manifest_file)?;
    let basis = WaveletBasis::new(
        WaveletFamily::parse(&manifest.basis_x)?,
        manifest.level_x,
    )?;
    let mut coeffs = data.x().clone();
    if let Some(mu) = &manifest.mu_x {
        if mu.len() != coeffs.ncols() {
            return Err(Error::ShapeMismatch(
                "stored means disagree with the coefficient columns".into(),
            ));
        }
        for i in 0..coeffs.nrows() {
            for (j, m) in mu.iter().enumerate() {
                coeffs[(i, j)] += m;
            }
        }
    }
    let tau = e_step(&spec.params, data)?;
    let pattern = extract_pattern(&spec.params, DEFAULT_PATTERN_TOL);
    let out_path = {
        let stem = args
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "eval".into());
        args.out.with_file_name(format!("{stem}_representatives.csv"))
    };
    let mut w = csv::Writer::from_path(&out_path)
        .map_err(|e| Error::InvalidInput(format!("open representatives csv: {e}")))?;
    let mut header = vec!["component".to_string()];
    header.extend((1..=manifest.original_len_x).map(|t| format!("t{t}")));
    w.write_record(&header)
        .map_err(|e| Error::InvalidInput(format!("write header: {e}")))?;
    for k in 0..spec.params.k() {
        match reconstruct_representative(
            &tau,
            k,
            args.threshold,
            &coeffs,
            &pattern,
            basis,
            manifest.original_len_x,
        ) {
            Ok(curve) => {
                let mut row = vec![(k + 1).to_string()];
                row.extend(curve.iter().map(|v| v.to_string()));
                w.write_record(&row)
                    .map_err(|e| Error::InvalidInput(format!("write row: {e}")))?;
            }
            Err(Error::EmptyRepresentative(_)) => {
                notices.push(format!(
                    "component {} has no observation above threshold {}; representative omitted",
                    k + 1,
                    args.threshold
                ));
            }
            Err(e) => return Err(e),
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(format!("flush representatives csv: {e}")))?;
    Ok(out_path.display().to_string())
}

// ---------------------------------------------------------------------------
// wavelet

#[derive(Debug, Args)]
pub struct WaveletArgs {
    /// Functional CSV of predictor curves (one function per row).
    #[arg(long, required_unless_present = "generate_cosine")]
    pub x: Option<PathBuf>,
    /// Functional CSV of response curves; defaults to the predictor file.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// haar | daubechies2 | symmlet4
    #[arg(long, default_value = "haar")]
    pub basis: String,
    #[arg(long, default_value_t = 1)]
    pub level: usize,
    /// Response-side basis; defaults to --basis.
    #[arg(long)]
    pub y_basis: Option<String>,
    /// Response-side level; defaults to --level.
    #[arg(long)]
    pub y_level: Option<usize>,
    /// Subtract column means from both coefficient blocks (stored in the
    /// manifest).
    #[arg(long, default_value_t = false)]
    pub center: bool,
    /// Write reconstruction.csv with the inverse transform of the projected
    /// predictors.
    #[arg(long, default_value_t = false)]
    pub roundtrip: bool,
    /// Generate the cosine-mixture functional benchmark instead of reading
    /// files.
    #[arg(long, default_value_t = false)]
    pub generate_cosine: bool,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 15)]
    pub grid_len: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WaveletManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: WaveletConfig,
    pub basis_x: String,
    pub level_x: usize,
    pub basis_y: String,
    pub level_y: usize,
    pub original_len_x: usize,
    pub original_len_y: usize,
    pub padded_len_x: usize,
    pub padded_len_y: usize,
    pub mu_x: Option<Vec<f64>>,
    pub mu_y: Option<Vec<f64>>,
    pub labels_present: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub x: Option<String>,
    pub y: Option<String>,
    pub basis: String,
    pub level: usize,
    pub y_basis: Option<String>,
    pub y_level: Option<usize>,
    pub center: bool,
    pub generate_cosine: bool,
    pub n: usize,
    pub grid_len: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

pub fn cmd_wavelet(args: &WaveletArgs) -> Result<()> {
    let (f, g, labels) = if args.generate_cosine {
        let spec = CosineMixtureSpec {
            n: args.n,
            grid_len: args.grid_len,
            noise_sd: args.noise_sd,
            seed: args.seed,
        };
        let (f, g, labels) = generate_cosine_mixture(&spec);
        (f, g, Some(labels))
    } else {
        let x_path = args.x.as_ref().expect("clap enforces presence");
        let f = read_functional_csv(x_path)?;
        let g = match &args.y {
            Some(path) => read_functional_csv(path)?,
            None => f.clone(),
        };
        (f, g, None)
    };

    let basis_x = WaveletBasis::new(WaveletFamily::parse(&args.basis)?, args.level)?;
    let basis_y = WaveletBasis::new(
        WaveletFamily::parse(args.y_basis.as_deref().unwrap_or(&args.basis))?,
        args.y_level.unwrap_or(args.level),
    )?;

    let (projected, meta) = if args.center {
        project_dataset_centered(&f, &g, basis_x, basis_y)?
    } else {
        project_dataset(&f, &g, basis_x, basis_y)?
    };
    let projected = Dataset::new(
        projected.x().clone(),
        projected.y().clone(),
        labels.clone(),
    )?;

    ensure_dir(&args.out_dir)?;
    write_dataset_csv(&args.out_dir.join("dataset.csv"), &projected)?;
    if args.generate_cosine {
        write_functional_csv(&args.out_dir.join("functions_x.csv"), &f)?;
        write_functional_csv(&args.out_dir.join("functions_y.csv"), &g)?;
    }

    if args.roundtrip {
        let mut rec = f.clone();
        for i in 0..projected.n() {
            let mut row: Vec<f64> = (0..projected.p()).map(|j| projected.x()[(i, j)]).collect();
            if let Some(mu) = &meta.mu_x {
                for (v, m) in row.iter_mut().zip(mu) {
                    *v += m;
                }
            }
            let coeffs = WaveletCoeffs::from_vector(&row, basis_x, meta.original_len_x)?;
            let signal = idwt(&coeffs)?;
            for (j, v) in signal.into_iter().enumerate() {
                rec[(i, j)] = v;
            }
        }
        write_functional_csv(&args.out_dir.join("reconstruction.csv"), &rec)?;
    }

    let manifest = WaveletManifest {
        schema_version: SCHEMA_VERSION,
        command: "wavelet".into(),
        config: WaveletConfig {
            x: args.x.as_ref().map(|p| p.display().to_string()),
            y: args.y.as_ref().map(|p| p.display().to_string()),
            basis: args.basis.clone(),
            level: args.level,
            y_basis: args.y_basis.clone(),
            y_level: args.y_level,
            center: args.center,
            generate_cosine: args.generate_cosine,
            n: args.n,
            grid_len: args.grid_len,
            noise_sd: args.noise_sd,
            seed: args.seed,
        },
        basis_x: basis_x.family.name().into(),
        level_x: basis_x.level,
        basis_y: basis_y.family.name().into(),
        level_y: basis_y.level,
        original_len_x: meta.original_len_x,
        original_len_y: meta.original_len_y,
        padded_len_x: basis_x.padded_length(meta.original_len_x),
        padded_len_y: basis_y.padded_length(meta.original_len_y),
        mu_x: meta.mu_x.clone(),
        mu_y: meta.mu_y.clone(),
        labels_present: labels.is_some(),
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    Ok(())
}

// ---------------------------------------------------------------------------

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::ShapeMismatch(_)
        | Error::InsufficientCollection { .. }
        | Error::EmptyRepresentative(_) => 2,
        Error::EmptyCollection => 4,
        Error::DegenerateResponse { .. }
        | Error::InitializationFailed(_)
        | Error::Numerical(_) => 3,
    }
}
