//! Numeric kernels: cosine similarity, PCA, Pearson correlation and Cohen's
//! kappa.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("component count {k} out of range 1..={max}")]
    InvalidComponentCount { k: usize, max: usize },
}

impl MetricsError {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricsError::DimensionMismatch(..) => "dimension_mismatch",
            MetricsError::ZeroVector => "zero_vector",
            MetricsError::LengthMismatch(..) => "length_mismatch",
            MetricsError::TooFewSamples { .. } => "too_few_samples",
            MetricsError::ZeroVariance => "zero_variance",
            MetricsError::InvalidComponentCount { .. } => "invalid_component_count",
        }
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Principal axes of a point cloud, rows of `components` sorted by
/// decreasing explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Fits the top `k` principal components from the exact eigendecomposition
/// of the sample covariance (normalised by `n - 1`).
///
/// Each component's first coordinate with magnitude above `1e-12` is made
/// positive so repeated fits give identical maps.
pub fn pca_fit(points: &[Vec<f64>], k: usize) -> Result<PcaModel, MetricsError> {
    let n = points.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(MetricsError::DimensionMismatch(d, p.len()));
    }
    let max = d.min(n);
    if k == 0 || k > max {
        return Err(MetricsError::InvalidComponentCount { k, max });
    }

    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    if cov.iter().all(|&c| c == 0.0) {
        return Err(MetricsError::ZeroVariance);
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let mut axis: Vec<f64> = eigen.eigenvectors.column(idx).iter().copied().collect();
        let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
        axis.iter_mut().for_each(|x| *x /= norm);
        if axis.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0) {
            axis.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(axis);
        explained_variance.push(eigen.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

pub fn pca_project(model: &PcaModel, point: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if point.len() != model.dimension() {
        return Err(MetricsError::DimensionMismatch(model.dimension(), point.len()));
    }
    Ok(model
        .components
        .iter()
        .map(|c| {
            c.iter()
                .zip(point.iter().zip(&model.mean))
                .map(|(ci, (x, m))| ci * (x - m))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, MetricsError> {
    if xs.len() != ys.len() {
        return Err(MetricsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(CorrelationResult {
        r: (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0),
        n,
    })
}

/// Unweighted Cohen's kappa. Degenerate marginals where chance agreement is
/// certain (both raters always used the same single category) give 1.
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    let n = a.len() as f64;
    let mut marginals: HashMap<&T, (usize, usize)> = HashMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        marginals.entry(x).or_default().0 += 1;
        marginals.entry(y).or_default().1 += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}
