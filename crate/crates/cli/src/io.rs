//! File formats: dataset CSV, functional CSV, and the JSON documents written
//! by every command. Each JSON document carries a schema version and the full
//! effective configuration, and all floats are written in shortest
//! round-trip form, so reruns with identical inputs are byte-identical.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use mixreg::gem::GemConfig;
use mixreg::model::{Dataset, MixtureParams, ModelSpec, SparsityPattern};
use mixreg::selection::{ModelCollection, Provenance, SlopeDiagnostics, SlopePoint};
use mixreg::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn io_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{context}: {e}"))
}

// ---------------------------------------------------------------------------
// dataset CSV: header `x1..xp,y1..yq[,label]`

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err("open dataset csv", e))?;
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.extend((1..=data.q()).map(|m| format!("y{m}")));
    if data.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| io_err("write header", e))?;
    for i in 0..data.n() {
        let mut row: Vec<String> = (0..data.p()).map(|j| data.x()[(i, j)].to_string()).collect();
        row.extend((0..data.q()).map(|m| data.y()[(i, m)].to_string()));
        if let Some(labels) = data.labels() {
            row.push(labels[i].to_string());
        }
        w.write_record(&row).map_err(|e| io_err("write row", e))?;
    }
    w.flush().map_err(|e| io_err("flush dataset csv", e))?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err("open dataset csv", e))?;
    let header = r
        .headers()
        .map_err(|e| io_err("read header", e))?
        .clone();
    let mut p = 0;
    let mut q = 0;
    let mut has_label = false;
    for (idx, name) in header.iter().enumerate() {
        if name == format!("x{}", p + 1) && q == 0 && !has_label {
            p += 1;
        } else if name == format!("y{}", q + 1) && !has_label {
            q += 1;
        } else if name == "label" && idx == header.len() - 1 {
            has_label = true;
        } else {
            return Err(Error::InvalidInput(format!(
                "unexpected dataset column {name} at position {idx}"
            )));
        }
    }
    if p == 0 || q == 0 {
        return Err(Error::InvalidInput(
            "dataset header must list x1..xp then y1..yq".into(),
        ));
    }
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut n = 0;
    for record in r.records() {
        let record = record.map_err(|e| io_err("read row", e))?;
        if record.len() != p + q + usize::from(has_label) {
            return Err(Error::InvalidInput(format!(
                "row {n} has {} fields, expected {}",
                record.len(),
                p + q + usize::from(has_label)
            )));
        }
        for j in 0..p {
            xs.push(parse_float(&record[j], n)?);
        }
        for m in 0..q {
            ys.push(parse_float(&record[p + m], n)?);
        }
        if has_label {
            labels.push(
                record[p + q]
                    .parse::<usize>()
                    .map_err(|e| io_err(&format!("label in row {n}"), e))?,
            );
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    Dataset::new(
        DMatrix::from_row_slice(n, p, &xs),
        DMatrix::from_row_slice(n, q, &ys),
        has_label.then_some(labels),
    )
}

fn parse_float(field: &str, row: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|e| io_err(&format!("number in row {row}"), e))
}

// ---------------------------------------------------------------------------
// functional CSV: headerless numeric rows, one function per row

pub fn read_functional_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err("open functional csv", e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| io_err("read row", e))?;
        let row: Vec<f64> = record
            .iter()
            .map(|f| parse_float(f, i))
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::InvalidInput(format!(
                    "ragged input: row {i} has {} points, row 0 has {}",
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidInput("functional csv has no data".into()));
    }
    let (n, t) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, t, |i, j| rows[i][j]))
}

pub fn write_functional_csv(path: &Path, f: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| io_err("open functional csv", e))?;
    for i in 0..f.nrows() {
        let row: Vec<String> = (0..f.ncols()).map(|j| f[(i, j)].to_string()).collect();
        w.write_record(&row).map_err(|e| io_err("write row", e))?;
    }
    w.flush().map_err(|e| io_err("flush functional csv", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON documents

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| io_err("serialize json", e))?;
    fs::write(path, body + "\n").map_err(|e| io_err("write json", e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let body = fs::read_to_string(path).map_err(|e| io_err("read json", e))?;
    serde_json::from_str(&body).map_err(|e| io_err("parse json", e))
}

/// GEM tuning as written into reproducibility manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GemSettings {
    pub min_iter: usize,
    pub max_iter: usize,
    pub eps_loglik: f64,
    pub eps_param: f64,
    pub line_search_base: f64,
    pub line_search_max: usize,
    pub n_init: usize,
    pub init_iter: usize,
}

impl From<&GemConfig> for GemSettings {
    fn from(c: &GemConfig) -> Self {
        Self {
            min_iter: c.min_iter,
            max_iter: c.max_iter,
            eps_loglik: c.eps_loglik,
            eps_param: c.eps_param,
            line_search_base: c.line_search_base,
            line_search_max: c.line_search_max,
            n_init: c.n_init,
            init_iter: c.init_iter,
        }
    }
}

impl GemSettings {
    pub fn apply(&self, mut config: GemConfig) -> GemConfig {
        config.min_iter = self.min_iter;
        config.max_iter = self.max_iter;
        config.eps_loglik = self.eps_loglik;
        config.eps_param = self.eps_param;
        config.line_search_base = self.line_search_base;
        config.line_search_max = self.line_search_max;
        config.n_init = self.n_init;
        config.init_iter = self.init_iter;
        config
    }
}

/// One fitted model on the wire. Matrices are row-major nested arrays; `J`
/// holds 0-based `(m, j)` couples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub procedure: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: Option<f64>,
    #[serde(rename = "R")]
    pub ranks: Option<Vec<usize>>,
    #[serde(rename = "J")]
    pub pattern: Vec<(usize, usize)>,
    pub pi: Vec<f64>,
    #[serde(rename = "Phi")]
    pub phi: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "P")]
    pub p_diag: Vec<Vec<f64>>,
    pub loglik: f64,
    pub dim: usize,
    pub converged: bool,
}

impl ModelRecord {
    pub fn from_spec(spec: &ModelSpec, provenance: &Provenance) -> Self {
        let params = &spec.params;
        let phi = (0..params.k())
            .map(|k| {
                (0..params.q())
                    .map(|m| (0..params.p()).map(|j| params.phi(k)[(m, j)]).collect())
                    .collect()
            })
            .collect();
        let p_diag = (0..params.k())
            .map(|k| params.p_diag(k).iter().cloned().collect())
            .collect();
        Self {
            procedure: provenance.procedure.clone(),
            k: spec.k,
            lambda: provenance.lambda,
            ranks: spec.ranks.clone(),
            pattern: spec.pattern.pairs().to_vec(),
            pi: params.pi().to_vec(),
            phi,
            p_diag,
            loglik: spec.loglik,
            dim: spec.dim,
            converged: spec.converged,
        }
    }

    pub fn to_spec(&self) -> Result<(ModelSpec, Provenance)> {
        if self.phi.len() != self.k || self.p_diag.len() != self.k || self.pi.len() != self.k {
            return Err(Error::InvalidInput(
                "model record component counts disagree".into(),
            ));
        }
        let q = self
            .phi
            .first()
            .and_then(|f| (!f.is_empty()).then_some(f.len()))
            .ok_or_else(|| Error::InvalidInput("model record has empty Phi".into()))?;
        let p = self.phi[0][0].len();
        let mut phis = Vec::with_capacity(self.k);
        let mut ps = Vec::with_capacity(self.k);
        for k in 0..self.k {
            if self.phi[k].len() != q
                || self.phi[k].iter().any(|row| row.len() != p)
                || self.p_diag[k].len() != q
            {
                return Err(Error::InvalidInput("model record shape mismatch".into()));
            }
            let flat: Vec<f64> = self.phi[k].iter().flatten().cloned().collect();
            phis.push(DMatrix::from_row_slice(q, p, &flat));
            ps.push(DVector::from_vec(self.p_diag[k].clone()));
        }
        let params = MixtureParams::new(self.pi.clone(), phis, ps)?;
        let spec = ModelSpec {
            k: self.k,
            pattern: SparsityPattern::from_pairs(self.pattern.clone()),
            ranks: self.ranks.clone(),
            params,
            loglik: self.loglik,
            dim: self.dim,
            converged: self.converged,
        };
        let provenance = Provenance {
            procedure: self.procedure.clone(),
            k: self.k,
            lambda: self.lambda,
            ranks: self.ranks.clone(),
        };
        Ok((spec, provenance))
    }
}

/// Everything that determines the fit output. The worker count is absent on
/// purpose: results are identical for any parallelism level, so it is not
/// part of the effective configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitManifest {
    pub data: String,
    pub procedure: String,
    pub kmin: usize,
    pub kmax: usize,
    pub lambda_count: usize,
    pub rmax: Option<usize>,
    pub seed: u64,
    pub gem: GemSettings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectionFile {
    pub schema_version: u32,
    pub command: String,
    pub config: FitManifest,
    pub n: usize,
    pub models: Vec<ModelRecord>,
}

impl CollectionFile {
    pub fn from_collection(config: FitManifest, collection: &ModelCollection) -> Self {
        let models = collection
            .entries()
            .iter()
            .zip(collection.provenance())
            .map(|(spec, prov)| ModelRecord::from_spec(spec, prov))
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            command: "fit".into(),
            config,
            n: collection.n(),
            models,
        }
    }

    pub fn to_collection(&self) -> Result<ModelCollection> {
        let mut collection = ModelCollection::new(self.n);
        for record in &self.models {
            let (spec, prov) = record.to_spec()?;
            collection.insert(spec, prov);
        }
        Ok(collection)
    }
}

pub fn write_slope_points_csv(path: &Path, points: &[SlopePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err("open slope csv", e))?;
    w.write_record(["dim", "dim_over_n", "loglik_over_n"])
        .map_err(|e| io_err("write header", e))?;
    for p in points {
        w.write_record([
            p.dim.to_string(),
            p.dim_over_n.to_string(),
            p.loglik_over_n.to_string(),
        ])
        .map_err(|e| io_err("write row", e))?;
    }
    w.flush().map_err(|e| io_err("flush slope csv", e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopePointDto {
    pub dim: usize,
    pub dim_over_n: f64,
    pub loglik_over_n: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeDiagnosticsDto {
    pub points: Vec<SlopePointDto>,
    pub kappa: f64,
    pub intercept: f64,
    pub window: usize,
    pub bic_fallback: bool,
}

impl From<&SlopeDiagnostics> for SlopeDiagnosticsDto {
    fn from(d: &SlopeDiagnostics) -> Self {
        Self {
            points: d
                .points
                .iter()
                .map(|p| SlopePointDto {
                    dim: p.dim,
                    dim_over_n: p.dim_over_n,
                    loglik_over_n: p.loglik_over_n,
                })
                .collect(),
            kappa: d.kappa,
            intercept: d.intercept,
            window: d.window,
            bic_fallback: d.bic_fallback,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectManifest {
    pub collection: String,
    pub criterion: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedFile {
    pub schema_version: u32,
    pub command: String,
    pub config: SelectManifest,
    pub kappa_hat: Option<f64>,
    pub diagnostics: Option<SlopeDiagnosticsDto>,
    pub model: ModelRecord,
}

/// Read a fitted model from either a selection output or a bare record.
pub fn read_model_record(path: &Path) -> Result<ModelRecord> {
    if let Ok(selected) = read_json::<SelectedFile>(path) {
        return Ok(selected.model);
    }
    read_json::<ModelRecord>(path)
}
