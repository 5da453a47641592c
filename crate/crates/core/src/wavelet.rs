//! Orthogonal discrete wavelet transform (pyramid algorithm) with periodic
//! boundary handling, plus the projection of functional samples into
//! coefficient datasets and the reconstruction of cluster representatives.
//!
//! Periodic extension keeps the analysis map exactly orthogonal at every
//! level, so Parseval and perfect reconstruction hold to machine precision.
//! Signals whose length is not a multiple of `2^level` are zero-padded to the
//! next valid length; the original length is carried along so the inverse can
//! crop.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{Dataset, Responsibilities, SparsityPattern};

/// Orthonormal quadrature-mirror filter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    Daubechies2,
    Symmlet4,
}

impl WaveletFamily {
    pub fn name(&self) -> &'static str {
        match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Daubechies2 => "daubechies2",
            WaveletFamily::Symmlet4 => "symmlet4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(WaveletFamily::Haar),
            "daubechies2" | "db2" => Ok(WaveletFamily::Daubechies2),
            "symmlet4" | "sym4" => Ok(WaveletFamily::Symmlet4),
            other => Err(Error::InvalidInput(format!("unknown wavelet family {other}"))),
        }
    }

    fn scaling_filter(&self) -> &'static [f64] {
        match self {
            WaveletFamily::Haar => &HAAR,
            WaveletFamily::Daubechies2 => &DAUBECHIES2,
            WaveletFamily::Symmlet4 => &SYMMLET4,
        }
    }
}

const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2; 2];

#[allow(clippy::excessive_precision)]
const DAUBECHIES2: [f64; 4] = [
    0.482962913144690250,
    0.836516303737469000,
    0.224143868041857350,
    -0.129409522550921450,
];

// 8-tap least-asymmetric Daubechies filter.
#[allow(clippy::excessive_precision)]
const SYMMLET4: [f64; 8] = [
    0.032223100604042700,
    -0.012603967262037833,
    -0.099219543576847220,
    0.297857795605277360,
    0.803738751805916100,
    0.497618667632015450,
    -0.029635527645998510,
    -0.075765714789273330,
];

/// A wavelet family together with a decomposition level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletBasis {
    pub family: WaveletFamily,
    pub level: usize,
}

impl WaveletBasis {
    pub fn new(family: WaveletFamily, level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidInput("level must be at least 1".into()));
        }
        Ok(Self { family, level })
    }

    /// Smallest multiple of `2^level` holding a length-`len` signal.
    pub fn padded_length(&self, len: usize) -> usize {
        let block = 1usize << self.level;
        len.div_ceil(block) * block
    }
}

/// Approximation and per-level detail coefficients of one signal.
/// `details[l]` holds level `l + 1` (finest first); the approximation lives
/// at the deepest level. Total coefficient count equals the padded length.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletCoeffs {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
    pub basis: WaveletBasis,
    pub original_length: usize,
}

impl WaveletCoeffs {
    /// Flatten as `[approx, coarsest detail, ..., finest detail]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.approx.clone();
        for d in self.details.iter().rev() {
            v.extend_from_slice(d);
        }
        v
    }

    /// Rebuild the level structure from a flat vector in `to_vector` order.
    pub fn from_vector(v: &[f64], basis: WaveletBasis, original_length: usize) -> Result<Self> {
        let padded = basis.padded_length(original_length);
        if v.len() != padded {
            return Err(Error::InvalidInput(format!(
                "expected {padded} coefficients, got {}",
                v.len()
            )));
        }
        let approx_len = padded >> basis.level;
        let approx = v[..approx_len].to_vec();
        let mut details = vec![Vec::new(); basis.level];
        let mut offset = approx_len;
        for l in (0..basis.level).rev() {
            let len = padded >> (l + 1);
            details[l] = v[offset..offset + len].to_vec();
            offset += len;
        }
        Ok(Self {
            approx,
            details,
            basis,
            original_length,
        })
    }

    pub fn total_len(&self) -> usize {
        self.approx.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }
}

fn highpass(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|t| {
            let v = h[l - 1 - t];
            if t % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn analyze_level(signal: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let g = highpass(h);
    let half = n / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let mut a = 0.0;
        let mut d = 0.0;
        for (t, &ht) in h.iter().enumerate() {
            let s = signal[(2 * k + t) % n];
            a += ht * s;
            d += g[t] * s;
        }
        approx[k] = a;
        detail[k] = d;
    }
    (approx, detail)
}

fn synthesize_level(approx: &[f64], detail: &[f64], h: &[f64]) -> Vec<f64> {
    let half = approx.len();
    let n = 2 * half;
    let g = highpass(h);
    let mut signal = vec![0.0; n];
    for k in 0..half {
        for (t, &ht) in h.iter().enumerate() {
            let idx = (2 * k + t) % n;
            signal[idx] += ht * approx[k] + g[t] * detail[k];
        }
    }
    signal
}

/// Forward transform: cascade of filter-downsample steps with periodic
/// boundary. The signal is zero-padded to the next multiple of `2^level`.
pub fn dwt(signal: &[f64], basis: WaveletBasis) -> Result<WaveletCoeffs> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signal entries must be finite".into()));
    }
    if (1usize << basis.level) > signal.len() {
        return Err(Error::InvalidInput(format!(
            "level {} too deep for a length-{} signal",
            basis.level,
            signal.len()
        )));
    }
    let padded = basis.padded_length(signal.len());
    let mut current = signal.to_vec();
    current.resize(padded, 0.0);
    let h = basis.family.scaling_filter();
    let mut details = Vec::with_capacity(basis.level);
    for _ in 0..basis.level {
        let (a, d) = analyze_level(&current, h);
        details.push(d);
        current = a;
    }
    Ok(WaveletCoeffs {
        approx: current,
        details,
        basis,
        original_length: signal.len(),
    })
}

/// Inverse transform; crops back to the original length.
pub fn idwt(coeffs: &WaveletCoeffs) -> Result<Vec<f64>> {
    let basis = coeffs.basis;
    if coeffs.details.len() != basis.level {
        return Err(Error::InvalidInput(format!(
            "{} detail levels for a level-{} basis",
            coeffs.details.len(),
            basis.level
        )));
    }
    let padded = basis.padded_length(coeffs.original_length);
    if coeffs.total_len() != padded {
        return Err(Error::InvalidInput(format!(
            "coefficient count {} does not match padded length {padded}",
            coeffs.total_len()
        )));
    }
    let mut current = coeffs.approx.clone();
    let h = basis.family.scaling_filter();
    for l in (0..basis.level).rev() {
        if coeffs.details[l].len() != current.len() {
            return Err(Error::InvalidInput(
                "corrupted level structure: detail length mismatch".into(),
            ));
        }
        current = synthesize_level(&current, &coeffs.details[l], h);
    }
    current.truncate(coeffs.original_length);
    Ok(current)
}

/// Companion metadata of a projected dataset, needed to invert the
/// projection and to undo centering.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletMeta {
    pub basis_x: WaveletBasis,
    pub basis_y: WaveletBasis,
    pub original_len_x: usize,
    pub original_len_y: usize,
    /// Column means removed from the coefficient blocks, when centered.
    pub mu_x: Option<Vec<f64>>,
    pub mu_y: Option<Vec<f64>>,
}

/// Project functional samples rowwise: predictors become the coefficients of
/// `f`, responses the coefficients of `g`.
pub fn project_dataset(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    basis_x: WaveletBasis,
    basis_y: WaveletBasis,
) -> Result<(Dataset, WaveletMeta)> {
    project_dataset_impl(f, g, basis_x, basis_y, false)
}

/// Same projection, with both coefficient blocks centered by their column
/// means; the removed means are stored in the metadata so predictions can add
/// them back.
pub fn project_dataset_centered(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    basis_x: WaveletBasis,
    basis_y: WaveletBasis,
) -> Result<(Dataset, WaveletMeta)> {
    project_dataset_impl(f, g, basis_x, basis_y, true)
}

fn project_dataset_impl(
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
    basis_x: WaveletBasis,
    basis_y: WaveletBasis,
    center: bool,
) -> Result<(Dataset, WaveletMeta)> {
    if f.nrows() != g.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictor functions, {} response functions",
            f.nrows(),
            g.nrows()
        )));
    }
    if f.nrows() == 0 {
        return Err(Error::InvalidInput("no functions to project".into()));
    }
    let n = f.nrows();
    let px = basis_x.padded_length(f.ncols());
    let py = basis_y.padded_length(g.ncols());
    let mut x = DMatrix::zeros(n, px);
    let mut y = DMatrix::zeros(n, py);
    for i in 0..n {
        let fr: Vec<f64> = f.row(i).iter().cloned().collect();
        let gr: Vec<f64> = g.row(i).iter().cloned().collect();
        let cx = dwt(&fr, basis_x)?.to_vector();
        let cy = dwt(&gr, basis_y)?.to_vector();
        for (j, v) in cx.into_iter().enumerate() {
            x[(i, j)] = v;
        }
        for (m, v) in cy.into_iter().enumerate() {
            y[(i, m)] = v;
        }
    }
    let (mu_x, mu_y) = if center {
        let mx: Vec<f64> = (0..px).map(|j| x.column(j).sum() / n as f64).collect();
        let my: Vec<f64> = (0..py).map(|m| y.column(m).sum() / n as f64).collect();
        for i in 0..n {
            for j in 0..px {
                x[(i, j)] -= mx[j];
            }
            for m in 0..py {
                y[(i, m)] -= my[m];
            }
        }
        (Some(mx), Some(my))
    } else {
        (None, None)
    };
    let meta = WaveletMeta {
        basis_x,
        basis_y,
        original_len_x: f.ncols(),
        original_len_y: g.ncols(),
        mu_x,
        mu_y,
    };
    Ok((Dataset::new(x, y, None)?, meta))
}

/// Cluster representative in signal space: average the predictor coefficient
/// rows with responsibility above the threshold in the given (0-based)
/// component, zero every coefficient outside the pattern's predictor
/// columns, and invert the transform.
pub fn reconstruct_representative(
    tau: &Responsibilities,
    component: usize,
    threshold: f64,
    coeffs: &DMatrix<f64>,
    pattern: &SparsityPattern,
    basis: WaveletBasis,
    original_length: usize,
) -> Result<Vec<f64>> {
    if component >= tau.k() {
        return Err(Error::InvalidInput(format!(
            "component {component} out of range"
        )));
    }
    if tau.n() != coeffs.nrows() {
        return Err(Error::ShapeMismatch(
            "responsibilities and coefficient rows disagree".into(),
        ));
    }
    let padded = basis.padded_length(original_length);
    if coeffs.ncols() != padded {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficient columns, padded length {padded}",
            coeffs.ncols()
        )));
    }
    let rows: Vec<usize> = (0..tau.n())
        .filter(|&i| tau.get(i, component) > threshold)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptyRepresentative(threshold));
    }
    let relevant = pattern.columns();
    let mut mean = vec![0.0; padded];
    for &i in &rows {
        for j in 0..padded {
            mean[j] += coeffs[(i, j)];
        }
    }
    for (j, v) in mean.iter_mut().enumerate() {
        *v /= rows.len() as f64;
        if !relevant.contains(&j) {
            *v = 0.0;
        }
    }
    let coeffs = WaveletCoeffs::from_vector(&mean, basis, original_length)?;
    idwt(&coeffs)
}
