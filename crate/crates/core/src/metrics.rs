//! Histograms, KL divergence, covariance eigenvalue agreement and 2D ratio
//! grids.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::SampleSet;
use crate::{Error, Result};

pub const KL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BinScale {
    #[default]
    Linear,
    Log,
}

/// Bins are half-open `[e_i, e_{i+1})` except the last, which also holds its
/// upper edge so that the maximum of a default-ranged sample is counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub scale: BinScale,
    pub underflow: u64,
    pub overflow: u64,
}

fn finite_range(values: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite sample {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() {
        return Err(Error::InsufficientSamples("cannot infer a range from no samples".into()));
    }
    Ok((lo, hi))
}

/// `bins + 1` strictly increasing edges over `[lo, hi]`.
pub fn make_edges(bins: usize, lo: f64, hi: f64, scale: BinScale) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::InvalidArgument(format!("invalid bin range [{lo}, {hi}]")));
    }
    let edges: Vec<f64> = match scale {
        BinScale::Linear => (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect(),
        BinScale::Log => {
            if lo <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log binning needs a positive range, got lower edge {lo}"
                )));
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..=bins)
                .map(|i| (a + (b - a) * i as f64 / bins as f64).exp())
                .collect()
        }
    };
    let mut edges = edges;
    // pin the ends exactly
    edges[0] = lo;
    edges[bins] = hi;
    if edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("bin range too narrow for the bin count".into()));
    }
    Ok(edges)
}

/// Bin of `v`, or `Err(true)` for overflow and `Err(false)` for underflow.
fn locate(edges: &[f64], v: f64) -> std::result::Result<usize, bool> {
    let last = edges.len() - 1;
    if v.is_nan() {
        return Err(true);
    }
    if v < edges[0] {
        return Err(false);
    }
    if v > edges[last] {
        return Err(true);
    }
    if v == edges[last] {
        return Ok(last - 1);
    }
    // first edge strictly greater than v, minus one
    Ok(edges.partition_point(|&e| e <= v) - 1)
}

impl Histogram {
    pub fn with_edges(edges: Vec<f64>, scale: BinScale) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("edges must be strictly increasing".into()));
        }
        let bins = edges.len() - 1;
        Ok(Self {
            edges,
            counts: vec![0; bins],
            scale,
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn fill(&mut self, values: &[f64]) {
        for &v in values {
            match locate(&self.edges, v) {
                Ok(i) => self.counts[i] += 1,
                Err(true) => self.overflow += 1,
                Err(false) => self.underflow += 1,
            }
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.in_range() + self.underflow + self.overflow
    }
}

/// Histogram of `samples`. Without an explicit range, edges span the sample's
/// own minimum and maximum.
pub fn build_histogram(
    samples: &[f64],
    bins: usize,
    scale: BinScale,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let (lo, hi) = finite_range(samples)?;
            if scale == BinScale::Log && lo <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "log binning needs positive samples, found {lo}"
                )));
            }
            (lo, hi)
        }
    };
    let mut h = Histogram::with_edges(make_edges(bins, lo, hi, scale)?, scale)?;
    h.fill(samples);
    Ok(h)
}

fn normalized(h: &Histogram) -> Vec<f64> {
    let total = h.in_range() as f64;
    if total == 0.0 {
        return vec![0.0; h.bins()];
    }
    h.counts.iter().map(|&c| c as f64 / total).collect()
}

/// `Σ p_i log(p_i / q_i)` over in-range counts, `p` from the reference and `q`
/// from the generated histogram. `q` is floored at `epsilon` and renormalized.
pub fn kl_divergence(reference: &Histogram, generated: &Histogram, epsilon: f64) -> Result<f64> {
    if reference.edges != generated.edges {
        return Err(Error::InvalidArgument("histograms have different edges".into()));
    }
    if reference.in_range() == 0 {
        return Err(Error::InsufficientSamples("reference histogram is empty".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let p = normalized(reference);
    let q_raw = normalized(generated);
    if p == q_raw {
        return Ok(0.0);
    }
    let mut q: Vec<f64> = q_raw.into_iter().map(|v| v.max(epsilon)).collect();
    let qs: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= qs);
    let kl: f64 = p
        .iter()
        .zip(&q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    // rounding can leave a tiny negative for nearly equal histograms
    Ok(kl.max(0.0))
}

/// KL of one dimension with edges spanning the reference sample.
pub fn kl_1d(reference: &[f64], generated: &[f64], bins: usize, scale: BinScale) -> Result<f64> {
    let href = build_histogram(reference, bins, scale, None)?;
    let mut hgen = Histogram::with_edges(href.edges.clone(), scale)?;
    hgen.fill(generated);
    kl_divergence(&href, &hgen, KL_EPSILON)
}

/// Per-dimension KL, reference-ranged. `log_dims` lists dimensions binned
/// logarithmically.
pub fn kl_per_dimension(
    reference: &SampleSet,
    generated: &SampleSet,
    bins: usize,
    log_dims: &[usize],
) -> Result<Vec<f64>> {
    check_same_dim(reference, generated)?;
    (0..reference.dim)
        .map(|d| {
            let scale = if log_dims.contains(&d) { BinScale::Log } else { BinScale::Linear };
            kl_1d(&reference.column(d), &generated.column(d), bins, scale)
        })
        .collect()
}

fn check_same_dim(a: &SampleSet, b: &SampleSet) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::LengthMismatch {
            what: "sample dimension",
            expected: a.dim,
            actual: b.dim,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub small_size: usize,
    pub large_size: usize,
    pub small_bins: usize,
    pub large_bins: usize,
    /// Allowed increase of the proportional-binning KL over the small-sample KL.
    pub margin: f64,
    /// Small-sample KL above this means the generator is not close enough for
    /// the comparison to mean anything.
    pub max_small_kl: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            small_size: 10_000,
            large_size: 100_000,
            small_bins: 100,
            large_bins: 1000,
            margin: 0.05,
            max_small_kl: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationReport {
    pub dimension: usize,
    pub kl_small: f64,
    pub kl_large_same_bins: f64,
    pub kl_large_proportional: f64,
    pub passed: bool,
}

/// Compares KL at (small, small bins), (large, small bins) and (large, large
/// bins) for one dimension. Reference sets of each size come from
/// `reference_sampler`; generated rows are taken from the front of
/// `generated`.
pub fn data_augmentation_check<F>(
    mut reference_sampler: F,
    generated: &SampleSet,
    dimension: usize,
    scale: BinScale,
    config: &AugmentationConfig,
) -> Result<AugmentationReport>
where
    F: FnMut(usize) -> Result<SampleSet>,
{
    if generated.len() < config.large_size || generated.len() < config.small_size {
        return Err(Error::InsufficientSamples(format!(
            "need {} generated samples, have {}",
            config.large_size.max(config.small_size),
            generated.len()
        )));
    }
    if dimension >= generated.dim {
        return Err(Error::InvalidArgument(format!(
            "dimension {dimension} out of range for {}-dimensional samples",
            generated.dim
        )));
    }
    let gen_col = generated.column(dimension);
    let ref_small = reference_sampler(config.small_size)?;
    let ref_large = reference_sampler(config.large_size)?;
    for r in [&ref_small, &ref_large] {
        check_same_dim(r, generated)?;
    }
    let kl_small = kl_1d(
        &ref_small.column(dimension),
        &gen_col[..config.small_size],
        config.small_bins,
        scale,
    )?;
    let large_col = ref_large.column(dimension);
    let gen_large = &gen_col[..config.large_size];
    let kl_large_same_bins = kl_1d(&large_col, gen_large, config.small_bins, scale)?;
    let kl_large_proportional = kl_1d(&large_col, gen_large, config.large_bins, scale)?;
    let passed = kl_small <= config.max_small_kl && kl_large_proportional <= kl_small + config.margin;
    Ok(AugmentationReport {
        dimension,
        kl_small,
        kl_large_same_bins,
        kl_large_proportional,
        passed,
    })
}

/// Sample covariance with denominator `n - 1`.
pub fn sample_covariance(samples: &SampleSet) -> Result<DMatrix<f64>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!("covariance needs 2 samples, have {n}")));
    }
    let d = samples.dim;
    let mut mean = vec![0.0; d];
    for r in &samples.rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for r in &samples.rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

pub fn eigenvalue_sum(cov: &DMatrix<f64>) -> f64 {
    cov.clone().symmetric_eigenvalues().iter().sum()
}

/// `|Σλ_ref - Σλ_gen| / Σλ_ref` over sample covariance eigenvalues.
pub fn covariance_eigen_agreement(reference: &SampleSet, generated: &SampleSet) -> Result<f64> {
    check_same_dim(reference, generated)?;
    if reference.dim < 2 {
        return Err(Error::InvalidArgument("eigenvalue agreement needs dimension >= 2".into()));
    }
    let sr = eigenvalue_sum(&sample_covariance(reference)?);
    let sg = eigenvalue_sum(&sample_covariance(generated)?);
    if !(sr > 0.0) {
        return Err(Error::Degenerate("reference covariance has zero trace".into()));
    }
    Ok((sr - sg).abs() / sr)
}

/// Reference/generated count ratio on a 2D grid spanning the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioGrid {
    pub dims: (usize, usize),
    pub edges_x: Vec<f64>,
    pub edges_y: Vec<f64>,
    /// `[ix][iy]`
    pub reference_counts: Vec<Vec<u64>>,
    pub generated_counts: Vec<Vec<u64>>,
    /// `None` where either count is zero.
    pub ratios: Vec<Vec<Option<f64>>>,
}

fn count_2d(samples: &SampleSet, dims: (usize, usize), ex: &[f64], ey: &[f64]) -> Vec<Vec<u64>> {
    let mut counts = vec![vec![0u64; ey.len() - 1]; ex.len() - 1];
    for r in &samples.rows {
        if let (Ok(i), Ok(j)) = (locate(ex, r[dims.0]), locate(ey, r[dims.1])) {
            counts[i][j] += 1;
        }
    }
    counts
}

pub fn build_ratio_grid(
    reference: &SampleSet,
    generated: &SampleSet,
    dims: (usize, usize),
    bins: (usize, usize),
    scales: (BinScale, BinScale),
) -> Result<RatioGrid> {
    check_same_dim(reference, generated)?;
    for d in [dims.0, dims.1] {
        if d >= reference.dim {
            return Err(Error::InvalidArgument(format!(
                "dimension {d} out of range for {}-dimensional samples",
                reference.dim
            )));
        }
    }
    let edges_for = |d: usize, b: usize, s: BinScale| -> Result<Vec<f64>> {
        let (lo, hi) = finite_range(&reference.column(d))?;
        make_edges(b, lo, hi, s)
    };
    let edges_x = edges_for(dims.0, bins.0, scales.0)?;
    let edges_y = edges_for(dims.1, bins.1, scales.1)?;
    let reference_counts = count_2d(reference, dims, &edges_x, &edges_y);
    let generated_counts = count_2d(generated, dims, &edges_x, &edges_y);
    let ratios = reference_counts
        .iter()
        .zip(&generated_counts)
        .map(|(rr, gr)| {
            rr.iter()
                .zip(gr)
                .map(|(&r, &g)| (r > 0 && g > 0).then(|| r as f64 / g as f64))
                .collect()
        })
        .collect();
    Ok(RatioGrid {
        dims,
        edges_x,
        edges_y,
        reference_counts,
        generated_counts,
        ratios,
    })
}

impl RatioGrid {
    /// One row per cell: `ix,iy,x_lo,x_hi,y_lo,y_hi,reference,generated,ratio`
    /// with an empty ratio field for masked cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["ix", "iy", "x_lo", "x_hi", "y_lo", "y_hi", "reference", "generated", "ratio"])?;
        for (ix, row) in self.ratios.iter().enumerate() {
            for (iy, ratio) in row.iter().enumerate() {
                w.write_record([
                    ix.to_string(),
                    iy.to_string(),
                    format!("{:?}", self.edges_x[ix]),
                    format!("{:?}", self.edges_x[ix + 1]),
                    format!("{:?}", self.edges_y[iy]),
                    format!("{:?}", self.edges_y[iy + 1]),
                    self.reference_counts[ix][iy].to_string(),
                    self.generated_counts[ix][iy].to_string(),
                    ratio.map(|r| format!("{r:?}")).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
