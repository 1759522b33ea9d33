//! Data model shared by the whole crate: the mixed data matrix, soft and hard
//! partitions, fitted parameters and the fit result record.

use ndarray::Array2;
use thiserror::Error;

/// Lower bound applied to every fitted block variance. Zero-variance blocks
/// (all cells identical) would otherwise send log-densities to infinity.
pub const VAR_FLOOR: f64 = 1e-8;

/// Fitted Bernoulli parameters are clamped into `[ALPHA_EPS, 1 - ALPHA_EPS]`
/// so that all-zero / all-one blocks keep finite log-masses.
pub const ALPHA_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidateError {
    #[error("matrix is empty (need at least one row and one column)")]
    EmptyMatrix,
    #[error("continuous cell ({row}, {col}) is not finite")]
    NonFiniteContinuous { row: usize, col: usize },
    #[error("binary cell ({row}, {col}) is not exactly 0 or 1")]
    NonBinaryEntry { row: usize, col: usize },
    #[error("continuous part has {continuous} rows but binary part has {binary}")]
    RowCountMismatch { continuous: usize, binary: usize },
}

/// A data table of `n` rows with `d_c` continuous and `d_d` binary columns.
///
/// The two column families are stored separately; either side may have zero
/// columns, which reduces the model to the plain continuous or binary latent
/// block model. Binary cells are kept as `f64` but are exactly 0.0 or 1.0.
///
/// Immutable after construction; shared freely across worker threads.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedDataMatrix {
    continuous: Array2<f64>,
    binary: Array2<f64>,
}

impl MixedDataMatrix {
    pub fn new(continuous: Array2<f64>, binary: Array2<f64>) -> Result<Self, ValidateError> {
        check_parts(&continuous, &binary)?;
        Ok(Self { continuous, binary })
    }

    pub fn n(&self) -> usize {
        self.continuous.nrows().max(self.binary.nrows())
    }

    pub fn d_c(&self) -> usize {
        self.continuous.ncols()
    }

    pub fn d_d(&self) -> usize {
        self.binary.ncols()
    }

    pub fn continuous(&self) -> &Array2<f64> {
        &self.continuous
    }

    pub fn binary(&self) -> &Array2<f64> {
        &self.binary
    }

    /// Reports the first invariant violation, if any.
    pub fn validate(&self) -> Result<(), ValidateError> {
        check_parts(&self.continuous, &self.binary)
    }

    /// The continuous columns alone (uni-type reduction).
    pub fn continuous_only(&self) -> Self {
        Self {
            continuous: self.continuous.clone(),
            binary: Array2::zeros((self.n(), 0)),
        }
    }

    /// The binary columns alone (uni-type reduction).
    pub fn binary_only(&self) -> Self {
        Self {
            continuous: Array2::zeros((self.n(), 0)),
            binary: self.binary.clone(),
        }
    }
}

fn check_parts(continuous: &Array2<f64>, binary: &Array2<f64>) -> Result<(), ValidateError> {
    let (nc, nb) = (continuous.nrows(), binary.nrows());
    if continuous.ncols() > 0 && binary.ncols() > 0 && nc != nb {
        return Err(ValidateError::RowCountMismatch { continuous: nc, binary: nb });
    }
    let n = nc.max(nb);
    if n == 0 || continuous.ncols() + binary.ncols() == 0 {
        return Err(ValidateError::EmptyMatrix);
    }
    for ((i, j), &v) in continuous.indexed_iter() {
        if !v.is_finite() {
            return Err(ValidateError::NonFiniteContinuous { row: i, col: j });
        }
    }
    for ((i, j), &v) in binary.indexed_iter() {
        if v != 0.0 && v != 1.0 {
            return Err(ValidateError::NonBinaryEntry { row: i, col: j });
        }
    }
    Ok(())
}

/// Mixing proportions and per-block distribution parameters.
///
/// Shapes: `pi` has `g` entries, `rho_c` has `m_c`, `rho_d` has `m_d`;
/// `mu` and `sigma2` are `g x m_c`, `alpha` is `g x m_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub pi: Vec<f64>,
    pub rho_c: Vec<f64>,
    pub rho_d: Vec<f64>,
    pub mu: Array2<f64>,
    pub sigma2: Array2<f64>,
    pub alpha: Array2<f64>,
}

impl ModelParams {
    pub fn g(&self) -> usize {
        self.pi.len()
    }

    pub fn m_c(&self) -> usize {
        self.rho_c.len()
    }

    pub fn m_d(&self) -> usize {
        self.rho_d.len()
    }

    /// Checks the type invariants: proportions on the simplex, variances at
    /// or above [`VAR_FLOOR`], Bernoulli parameters inside the clamp range.
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [("pi", &self.pi), ("rho_c", &self.rho_c), ("rho_d", &self.rho_d)] {
            if v.is_empty() {
                continue;
            }
            if v.iter().any(|&p| p < 0.0) {
                return Err(format!("{name} has a negative entry"));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(format!("{name} sums to {total}, expected 1"));
            }
        }
        if self.mu.dim() != self.sigma2.dim() {
            return Err("mu and sigma2 shapes differ".into());
        }
        if self.sigma2.iter().any(|&v| v < VAR_FLOOR) {
            return Err("sigma2 below VAR_FLOOR".into());
        }
        if self
            .alpha
            .iter()
            .any(|&a| !(ALPHA_EPS..=1.0 - ALPHA_EPS).contains(&a))
        {
            return Err("alpha outside clamp range".into());
        }
        Ok(())
    }
}

/// Variational membership matrices: `s` (rows, `n x g`), `tc` (continuous
/// columns, `d_c x m_c`), `td` (binary columns, `d_d x m_d`). Every row of
/// each matrix lies on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftMemberships {
    pub s: Array2<f64>,
    pub tc: Array2<f64>,
    pub td: Array2<f64>,
}

impl SoftMemberships {
    /// Checks the row-sum invariant (each simplex row sums to 1 within 1e-10).
    pub fn check(&self) -> Result<(), String> {
        for (name, m) in [("s", &self.s), ("tc", &self.tc), ("td", &self.td)] {
            for (i, row) in m.rows().into_iter().enumerate() {
                if row.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) {
                    return Err(format!("{name} row {i} has an entry outside [0,1]"));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-10 {
                    return Err(format!("{name} row {i} sums to {total}"));
                }
            }
        }
        Ok(())
    }
}

/// Hard cluster labels extracted from soft memberships by per-row argmax.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HardPartition {
    pub row_labels: Vec<usize>,
    pub ccol_labels: Vec<usize>,
    pub bcol_labels: Vec<usize>,
}

/// Per-row argmax with ties broken towards the lowest index.
pub fn hard_assign(m: &SoftMemberships) -> HardPartition {
    HardPartition {
        row_labels: argmax_rows(&m.s),
        ccol_labels: argmax_rows(&m.tc),
        bcol_labels: argmax_rows(&m.td),
    }
}

fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (idx, &v) in row.iter().enumerate() {
                if v > best_v {
                    best = idx;
                    best_v = v;
                }
            }
            best
        })
        .collect()
}

/// Everything the optimizer hands back for one fitted model.
///
/// `fc_trace` holds the criterion value after every outer iteration and is
/// non-decreasing (up to a relative 1e-8 tolerance) after the warm-up phase.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ModelParams,
    pub memberships: SoftMemberships,
    pub partition: HardPartition,
    pub fc_trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    /// Seed of the restart that produced this result.
    pub seed: u64,
}

impl FitResult {
    pub fn final_fc(&self) -> f64 {
        self.fc_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}
