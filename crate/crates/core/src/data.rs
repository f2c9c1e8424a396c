//! Reference samplers, preprocessing into the generator range `[-1, 1]`, and
//! CSV ingestion.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    #[default]
    Raw,
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub space: SpaceTag,
    #[serde(default)]
    pub columns: Vec<String>,
}

impl SampleSet {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::Parse {
                row: i,
                column: r.len(),
                message: format!("row has {} values, expected {dim}", r.len()),
            });
        }
        Ok(Self {
            dim,
            rows,
            space: SpaceTag::Raw,
            columns: default_columns(dim),
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            space: SpaceTag::Raw,
            columns: default_columns(dim),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[d]).collect()
    }

    /// First `n` rows (or all, if fewer).
    pub fn head(&self, n: usize) -> Self {
        Self {
            rows: self.rows.iter().take(n).cloned().collect(),
            ..self.clone()
        }
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Self {
        self.columns = columns;
        self
    }
}

fn default_columns(dim: usize) -> Vec<String> {
    (0..dim).map(|d| format!("x{d}")).collect()
}

/// `p(x; α, β) = x^(α-1) e^(-x/β) / (β^α Γ(α))`
pub fn gamma_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        // avoids 0 * ln(0) at the origin
        return (-x / beta).exp() / beta;
    }
    let ln_norm = alpha * beta.ln() + statrs::function::gamma::ln_gamma(alpha);
    ((alpha - 1.0) * x.ln() - x / beta - ln_norm).exp()
}

/// `n` draws from the gamma distribution with shape `alpha`, scale `beta`.
/// Shape 1 (exponential) uses the inverse CDF; other shapes use rejection
/// sampling.
pub fn sample_gamma<R: Rng + ?Sized>(n: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<SampleSet> {
    if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma shape {alpha} and scale {beta} must be positive"
        )));
    }
    let rows = if alpha == 1.0 {
        (0..n)
            .map(|_| {
                // 1 - U lies in (0, 1]
                let u: f64 = 1.0 - rng.random::<f64>();
                vec![-beta * u.ln()]
            })
            .collect()
    } else {
        let dist = Gamma::new(alpha, beta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (0..n).map(|_| vec![dist.sample(rng)]).collect()
    };
    SampleSet::new(1, rows)
}

/// Covariance of the correlated 3D Gaussian reference.
pub fn gaussian3d_covariance() -> Matrix3<f64> {
    Matrix3::new(0.5, 0.1, 0.25, 0.1, 0.5, 0.1, 0.25, 0.1, 0.5)
}

/// Lower-triangular `L` with `L Lᵀ = Σ`.
pub fn gaussian3d_factor() -> Matrix3<f64> {
    gaussian3d_covariance()
        .cholesky()
        .expect("covariance is positive definite")
        .l()
}

/// `n` draws from `N(0, Σ)`, `x = L u` with `u` standard normal.
pub fn sample_gaussian3d<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SampleSet {
    let l = gaussian3d_factor();
    let rows = (0..n)
        .map(|_| {
            let u = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
            let x = l * u;
            vec![x[0], x[1], x[2]]
        })
        .collect();
    SampleSet {
        dim: 3,
        rows,
        space: SpaceTag::Raw,
        columns: default_columns(3),
    }
}

/// Per-dimension affine, power and standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Preprocessor {
    /// `x -> 2 (x - min) / (max - min) - 1`
    Minmax { min: Vec<f64>, max: Vec<f64> },
    /// Yeo-Johnson, then standardization, then min-max.
    PowerMinmax {
        lambda: Vec<f64>,
        mean: Vec<f64>,
        std: Vec<f64>,
        min: Vec<f64>,
        max: Vec<f64>,
    },
}

fn column_ranges(samples: &SampleSet) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples("cannot fit on an empty set".into()));
    }
    let mut min = vec![f64::INFINITY; samples.dim];
    let mut max = vec![f64::NEG_INFINITY; samples.dim];
    for r in &samples.rows {
        for d in 0..samples.dim {
            min[d] = min[d].min(r[d]);
            max[d] = max[d].max(r[d]);
        }
    }
    for d in 0..samples.dim {
        if !(max[d] > min[d]) {
            return Err(Error::Degenerate(format!("dimension {d} is constant")));
        }
    }
    Ok((min, max))
}

pub fn fit_minmax(samples: &SampleSet) -> Result<Preprocessor> {
    let (min, max) = column_ranges(samples)?;
    Ok(Preprocessor::Minmax { min, max })
}

/// Yeo-Johnson transform of one value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if x >= 0.0 {
        if lambda.abs() < EPS {
            x.ln_1p()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-x).ln_1p()
    } else {
        -((1.0 - x).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

pub fn inverse_yeo_johnson(y: f64, lambda: f64) -> f64 {
    const EPS: f64 = 1e-12;
    if y >= 0.0 {
        if lambda.abs() < EPS {
            y.exp_m1()
        } else {
            (y * lambda + 1.0).powf(1.0 / lambda) - 1.0
        }
    } else if (lambda - 2.0).abs() < EPS {
        -(-y).exp_m1()
    } else {
        1.0 - (1.0 - (2.0 - lambda) * y).powf(1.0 / (2.0 - lambda))
    }
}

/// Profile log-likelihood of the normal model after a Yeo-Johnson transform.
fn yeo_johnson_log_likelihood(data: &[f64], lambda: f64) -> f64 {
    let n = data.len() as f64;
    let t: Vec<f64> = data.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = t.iter().sum::<f64>() / n;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) || !var.is_finite() {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = data.iter().map(|&x| x.signum() * x.abs().ln_1p()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

pub const LAMBDA_BOUNDS: (f64, f64) = (-5.0, 5.0);
const LAMBDA_TOL: f64 = 1e-6;

/// Maximum-likelihood Yeo-Johnson exponent by golden-section search.
pub fn fit_yeo_johnson_lambda(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::InsufficientSamples("need at least two values".into()));
    }
    let objective = |l: f64| -yeo_johnson_log_likelihood(data, l);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = LAMBDA_BOUNDS;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while (b - a).abs() > LAMBDA_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let lambda = 0.5 * (a + b);
    if !objective(lambda).is_finite() {
        return Err(Error::Degenerate("likelihood is not finite at the optimum".into()));
    }
    Ok(lambda)
}

pub fn fit_power(samples: &SampleSet) -> Result<Preprocessor> {
    column_ranges(samples)?;
    let mut lambda = Vec::with_capacity(samples.dim);
    let mut mean = Vec::with_capacity(samples.dim);
    let mut std = Vec::with_capacity(samples.dim);
    let mut min = Vec::with_capacity(samples.dim);
    let mut max = Vec::with_capacity(samples.dim);
    for d in 0..samples.dim {
        let col = samples.column(d);
        let l = fit_yeo_johnson_lambda(&col)?;
        let t: Vec<f64> = col.iter().map(|&x| yeo_johnson(x, l)).collect();
        let n = t.len() as f64;
        let m = t.iter().sum::<f64>() / n;
        let s = (t.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        if !(s > 0.0) {
            return Err(Error::Degenerate(format!("dimension {d} has zero spread after transform")));
        }
        let z: Vec<f64> = t.iter().map(|v| (v - m) / s).collect();
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lambda.push(l);
        mean.push(m);
        std.push(s);
        min.push(lo);
        max.push(hi);
    }
    Ok(Preprocessor::PowerMinmax {
        lambda,
        mean,
        std,
        min,
        max,
    })
}

impl Preprocessor {
    pub fn dim(&self) -> usize {
        match self {
            Preprocessor::Minmax { min, .. } | Preprocessor::PowerMinmax { min, .. } => min.len(),
        }
    }

    pub fn forward_value(&self, d: usize, x: f64) -> f64 {
        match self {
            Preprocessor::Minmax { min, max } => scale_to_unit(x, min[d], max[d]),
            Preprocessor::PowerMinmax {
                lambda,
                mean,
                std,
                min,
                max,
            } => {
                let z = (yeo_johnson(x, lambda[d]) - mean[d]) / std[d];
                scale_to_unit(z, min[d], max[d])
            }
        }
    }

    pub fn inverse_value(&self, d: usize, y: f64) -> f64 {
        match self {
            Preprocessor::Minmax { min, max } => unscale_from_unit(y, min[d], max[d]),
            Preprocessor::PowerMinmax {
                lambda,
                mean,
                std,
                min,
                max,
            } => {
                let z = unscale_from_unit(y, min[d], max[d]);
                inverse_yeo_johnson(z * std[d] + mean[d], lambda[d])
            }
        }
    }

    fn check_dim(&self, samples: &SampleSet) -> Result<()> {
        if samples.dim != self.dim() {
            return Err(Error::LengthMismatch {
                what: "preprocessor dimension",
                expected: self.dim(),
                actual: samples.dim,
            });
        }
        Ok(())
    }

    pub fn transform(&self, samples: &SampleSet) -> Result<SampleSet> {
        self.check_dim(samples)?;
        let rows = samples
            .rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(d, &x)| self.forward_value(d, x)).collect())
            .collect();
        Ok(SampleSet {
            rows,
            space: SpaceTag::Transformed,
            ..samples.clone()
        })
    }

    pub fn inverse_transform(&self, samples: &SampleSet) -> Result<SampleSet> {
        self.check_dim(samples)?;
        let rows = samples
            .rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(d, &y)| self.inverse_value(d, y)).collect())
            .collect();
        Ok(SampleSet {
            rows,
            space: SpaceTag::Raw,
            ..samples.clone()
        })
    }
}

fn scale_to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

fn unscale_from_unit(y: f64, lo: f64, hi: f64) -> f64 {
    lo + (y + 1.0) * 0.5 * (hi - lo)
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: &Path) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let columns: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let dim = columns.len();
    if dim == 0 || (dim == 1 && columns[0].is_empty()) {
        return Err(Error::Parse {
            row: 0,
            column: 0,
            message: "missing header row".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != dim {
            return Err(Error::Parse {
                row,
                column: record.len(),
                message: format!("expected {dim} fields, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(SampleSet::new(dim, rows)?.with_columns(columns))
}

/// Writes the set with a header row. Values use the shortest representation
/// that parses back to the identical `f64`.
pub fn save_csv(samples: &SampleSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let columns = if samples.columns.len() == samples.dim {
        samples.columns.clone()
    } else {
        default_columns(samples.dim)
    };
    writer.write_record(&columns)?;
    for r in &samples.rows {
        writer.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    writer.flush()?;
    Ok(())
}
