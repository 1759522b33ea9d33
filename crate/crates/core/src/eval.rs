//! Partition-quality metrics and sample aggregation: the Hubert-Arabie
//! adjusted Rand index, cluster matching for parameter-recovery reports, and
//! the summary record backing violin plots.

use thiserror::Error;

use crate::types::FitResult;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("label vectors have different lengths ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least two elements, got {0}")]
    TooShort(usize),
    #[error("empty input")]
    EmptyInput,
}

/// Adjusted Rand index between two labelings of the same items, via the
/// pair-counting contingency formula `(Index - E[Index]) / (Max - E[Index])`.
///
/// 1 for identical partitions (up to relabeling); the expected value under
/// independent partitions is 0 and negative values are possible (no
/// clamping). When both partitions are a single class the denominator
/// vanishes and the partitions are identical, so 1 is returned.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.len() < 2 {
        return Err(EvalError::TooShort(a.len()));
    }
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![0usize; ka * kb];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let comb2 = |c: usize| (c * c.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| comb2(c)).sum();
    let expected = sum_a * sum_b / comb2(a.len());
    let max_index = 0.5 * (sum_a + sum_b);
    if max_index == expected {
        // both partitions are single-class: identical by construction
        return Ok(1.0);
    }
    Ok((index - expected) / (max_index - expected))
}

/// ARI between the hard row partitions of two fits.
pub fn cross_ari(fit_a: &FitResult, fit_b: &FitResult) -> Result<f64, EvalError> {
    ari(&fit_a.partition.row_labels, &fit_b.partition.row_labels)
}

/// Aligns `candidate` clusters to `reference` clusters by maximum-weight
/// bipartite matching on label overlap (exhaustive over permutations, so `k`
/// must stay small). Returns `perm` with `perm[reference_cluster] =
/// candidate_cluster`.
pub fn match_clusters(reference: &[usize], candidate: &[usize], k: usize) -> Vec<usize> {
    assert!(k <= 8, "exhaustive matching is only meant for small k");
    assert_eq!(reference.len(), candidate.len());
    let mut overlap = vec![0f64; k * k];
    for (&r, &c) in reference.iter().zip(candidate) {
        overlap[r * k + c] += 1.0;
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best_perm = perm.clone();
    let mut best_score = f64::NEG_INFINITY;
    permute_search(&mut perm, 0, &overlap, k, &mut best_perm, &mut best_score);
    best_perm
}

fn permute_search(
    perm: &mut Vec<usize>,
    depth: usize,
    overlap: &[f64],
    k: usize,
    best_perm: &mut Vec<usize>,
    best_score: &mut f64,
) {
    if depth == k {
        let score: f64 = (0..k).map(|r| overlap[r * k + perm[r]]).sum();
        if score > *best_score {
            *best_score = score;
            best_perm.clone_from(perm);
        }
        return;
    }
    for i in depth..k {
        perm.swap(depth, i);
        permute_search(perm, depth + 1, overlap, k, best_perm, best_score);
        perm.swap(depth, i);
    }
}

/// Descriptive statistics plus a fixed-bandwidth Gaussian KDE sampled on a
/// 64-point grid, ready for violin rendering. The standard deviation is the
/// population one (singletons get 0) and the KDE bandwidth follows
/// Silverman's rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub kde_x: Vec<f64>,
    pub kde_y: Vec<f64>,
}

pub const KDE_GRID: usize = 64;

pub fn summarize(samples: &[f64]) -> Result<Summary, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let sd = (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let median = quantile(&sorted, 0.5);

    // Silverman: 0.9 min(sd, IQR/1.34) n^(-1/5), with a floor for degenerate
    // samples so the KDE stays well-defined.
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let mut scale = sd.min(iqr / 1.34);
    if scale <= 0.0 {
        scale = sd.max(mean.abs().max(1.0) * 1e-3);
    }
    let h = 0.9 * scale * (n as f64).powf(-0.2);

    let lo = sorted[0] - 3.0 * h;
    let hi = sorted[n - 1] + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let mut kde_x = Vec::with_capacity(KDE_GRID);
    let mut kde_y = Vec::with_capacity(KDE_GRID);
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    for g in 0..KDE_GRID {
        let x = lo + g as f64 * step;
        let density: f64 =
            sorted.iter().map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm;
        kde_x.push(x);
        kde_y.push(density);
    }

    Ok(Summary {
        count: n,
        mean,
        median,
        sd,
        min: sorted[0],
        max: sorted[n - 1],
        kde_x,
        kde_y,
    })
}

/// Linear-interpolation quantile on a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}
