//! The alternating variational EM driver: random initialization, the
//! row-side and column-side inner loops with convergence tests, a damped
//! warm-up phase, and the multi-restart wrapper.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    compute_fc, update_s_tempered, update_tc_td_tempered, update_theta, ModelError, ModelSpec,
};
use crate::types::{hard_assign, FitResult, MixedDataMatrix, SoftMemberships};

#[derive(Debug, Error, PartialEq)]
pub enum VemError {
    #[error("could not initialize memberships with every cluster non-empty after {attempts} attempts")]
    InitFailure { attempts: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("criterion became non-finite at outer iteration {outer}")]
    NonFiniteCriterion { outer: usize },
    #[error("all {restarts} restarts failed; last error: {last}")]
    AllRestartsFailed { restarts: usize, last: String },
}

/// Knobs of the optimization loop.
///
/// `eps_inner` / `eps_outer` are relative criterion-change thresholds for the
/// inner loops and the outer loop. `min_outer` forces that many outer
/// iterations before the convergence test may stop the fit. During the first
/// `warmup_steps` outer iterations each loop takes a single membership step
/// damped by `warmup_damping` and the stability tests are suppressed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VemConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub min_outer: usize,
    pub warmup_steps: usize,
    pub warmup_damping: f64,
    pub n_restarts: usize,
    pub seed: u64,
}

impl Default for VemConfig {
    fn default() -> Self {
        Self {
            max_outer: 100,
            max_inner: 10,
            eps_inner: 1e-5,
            eps_outer: 1e-10,
            min_outer: 10,
            warmup_steps: 5,
            warmup_damping: 0.3,
            n_restarts: 10,
            seed: 0,
        }
    }
}

impl VemConfig {
    pub fn check(&self) -> Result<(), String> {
        if !(self.eps_inner > self.eps_outer && self.eps_outer > 0.0) {
            return Err("need eps_inner > eps_outer > 0".into());
        }
        if !(self.warmup_damping > 0.0 && self.warmup_damping <= 1.0) {
            return Err("warmup_damping must lie in (0, 1]".into());
        }
        if self.n_restarts < 1 {
            return Err("need at least one restart".into());
        }
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err("iteration limits must be >= 1".into());
        }
        Ok(())
    }
}

/// Deterministic per-restart sub-seed (splitmix64 of master + index).
pub fn restart_seed(master: u64, restart: usize) -> u64 {
    let mut z = master.wrapping_add((restart as u64).wrapping_mul(0x9E3779B97F4A7C15));
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

const INIT_ATTEMPTS: usize = 1000;
// Initial simplex points are concentrated near a random vertex: a flat
// random point leaves the block parameters almost identical across clusters,
// which is exactly the single-cluster basin the optimizer must stay out of.
const INIT_SPREAD: f64 = 0.1;

/// Draws random membership matrices: every row is a random simplex point
/// placed near a uniformly chosen vertex, resampled (up to 1000 times) until
/// each cluster is the argmax of at least one row.
pub fn init_memberships(
    x: &MixedDataMatrix,
    spec: ModelSpec,
    rng: &mut impl Rng,
) -> Result<SoftMemberships, VemError> {
    spec.check_against(x)?;
    let s = draw_simplex_matrix(rng, x.n(), spec.g)?;
    let tc = if spec.m_c > 0 {
        draw_simplex_matrix(rng, x.d_c(), spec.m_c)?
    } else {
        Array2::zeros((x.d_c(), 0))
    };
    let td = if spec.m_d > 0 {
        draw_simplex_matrix(rng, x.d_d(), spec.m_d)?
    } else {
        Array2::zeros((x.d_d(), 0))
    };
    Ok(SoftMemberships { s, tc, td })
}

fn draw_simplex_matrix(
    rng: &mut impl Rng,
    rows: usize,
    k: usize,
) -> Result<Array2<f64>, VemError> {
    if k == 1 {
        return Ok(Array2::ones((rows, 1)));
    }
    for _ in 0..INIT_ATTEMPTS {
        let mut m = Array2::<f64>::zeros((rows, k));
        for i in 0..rows {
            let vertex = rng.random_range(0..k);
            let mut row = m.row_mut(i);
            // exponential spacings give a uniform point of the simplex
            let mut total = 0.0;
            for slot in row.iter_mut() {
                let e = -rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
                *slot = e;
                total += e;
            }
            for slot in row.iter_mut() {
                *slot *= INIT_SPREAD / total;
            }
            row[vertex] += 1.0 - INIT_SPREAD;
        }
        let mut seen = vec![false; k];
        for row in m.rows() {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (idx, &v) in row.iter().enumerate() {
                if v > best_v {
                    best = idx;
                    best_v = v;
                }
            }
            seen[best] = true;
        }
        if seen.iter().all(|&b| b) {
            return Ok(m);
        }
    }
    Err(VemError::InitFailure { attempts: INIT_ATTEMPTS })
}

fn damp_into(current: &mut Array2<f64>, fresh: Array2<f64>, lambda: f64) {
    if lambda >= 1.0 {
        *current = fresh;
    } else {
        current.zip_mut_with(&fresh, |old, &new| *old = (1.0 - lambda) * *old + lambda * new);
    }
}

/// How a run treats the warm-up phase.
///
/// `Tempered` damps the warm-up membership steps and divides their logits by
/// the number of summed data terms, which keeps early assignments soft on
/// large matrices (otherwise whole clusters starve before the block
/// parameters differentiate). `Direct` skips the warm-up phase entirely; its
/// hard early dynamics amplify the random initialization, which is what
/// escapes the single-cluster trap of symmetric configurations. The restart
/// wrapper alternates between the two.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WarmupStyle {
    Tempered,
    Direct,
}

/// One optimization run from a caller-supplied starting point.
///
/// Each outer iteration runs loop A (row update + M-step, to `eps_inner`
/// stability or `max_inner` steps) then loop B (column updates + M-step,
/// likewise), then records the criterion. The fit stops when the outer
/// criterion change is within `eps_outer` relative tolerance, but never
/// before `min_outer` outer iterations. Warm-up iterations take single
/// damped steps instead and never trigger the stability tests.
pub fn fit_from(
    x: &MixedDataMatrix,
    spec: ModelSpec,
    cfg: &VemConfig,
    init: SoftMemberships,
    seed: u64,
) -> Result<FitResult, VemError> {
    drive(x, spec, cfg, init, seed, WarmupStyle::Tempered)
}

fn drive(
    x: &MixedDataMatrix,
    spec: ModelSpec,
    cfg: &VemConfig,
    init: SoftMemberships,
    seed: u64,
    style: WarmupStyle,
) -> Result<FitResult, VemError> {
    spec.check_against(x)?;
    cfg.check().map_err(VemError::BadConfig)?;
    let mut m = init;
    let mut theta = update_theta(x, &m)?;
    let mut trace: Vec<f64> = Vec::new();
    let mut fc_last: Option<f64> = None;
    let mut fc_prev_outer: Option<f64> = None;
    let mut converged = false;
    let mut outers = 0;

    // Warm-up softness: logits are divided by the number of summed data
    // terms, so the early assignment steps stay genuinely soft at every data
    // size. Without this the first hard update starves whole clusters on
    // large matrices and the restart dies.
    let row_temp = (x.d_c() + x.d_d()).max(1) as f64;
    let col_temp = x.n().max(1) as f64;
    let warmup_steps = match style {
        WarmupStyle::Tempered => cfg.warmup_steps,
        WarmupStyle::Direct => 0,
    };

    for outer in 0..cfg.max_outer {
        let warmup = outer < warmup_steps;
        let lambda = if warmup { cfg.warmup_damping } else { 1.0 };
        let steps = if warmup { 1 } else { cfg.max_inner };

        for _ in 0..steps {
            let s_hat = update_s_tempered(x, &m, &theta, if warmup { row_temp } else { 1.0 })?;
            damp_into(&mut m.s, s_hat, lambda);
            theta = update_theta(x, &m)?;
            if !warmup {
                let fc = compute_fc(x, &m, &theta)?;
                if !fc.is_finite() {
                    return Err(VemError::NonFiniteCriterion { outer });
                }
                let stable =
                    fc_last.is_some_and(|p| (fc - p).abs() <= cfg.eps_inner * (1.0 + fc.abs()));
                fc_last = Some(fc);
                if stable {
                    break;
                }
            }
        }

        for _ in 0..steps {
            let (tc_hat, td_hat) =
                update_tc_td_tempered(x, &m, &theta, if warmup { col_temp } else { 1.0 })?;
            damp_into(&mut m.tc, tc_hat, lambda);
            damp_into(&mut m.td, td_hat, lambda);
            theta = update_theta(x, &m)?;
            if !warmup {
                let fc = compute_fc(x, &m, &theta)?;
                if !fc.is_finite() {
                    return Err(VemError::NonFiniteCriterion { outer });
                }
                let stable =
                    fc_last.is_some_and(|p| (fc - p).abs() <= cfg.eps_inner * (1.0 + fc.abs()));
                fc_last = Some(fc);
                if stable {
                    break;
                }
            }
        }

        let fc_outer = compute_fc(x, &m, &theta)?;
        if !fc_outer.is_finite() {
            return Err(VemError::NonFiniteCriterion { outer });
        }
        trace.push(fc_outer);
        outers = outer + 1;
        if !warmup && outers >= cfg.min_outer {
            if let Some(prev) = fc_prev_outer {
                if (fc_outer - prev).abs() <= cfg.eps_outer * (1.0 + fc_outer.abs()) {
                    converged = true;
                }
            }
        }
        fc_prev_outer = Some(fc_outer);
        if converged {
            break;
        }
    }

    let partition = hard_assign(&m);
    Ok(FitResult {
        params: theta,
        memberships: m,
        partition,
        fc_trace: trace,
        outer_iters: outers,
        converged,
        seed,
    })
}

/// One optimization run from a fresh random initialization drawn with `seed`.
pub fn fit_once(
    x: &MixedDataMatrix,
    spec: ModelSpec,
    cfg: &VemConfig,
    seed: u64,
) -> Result<FitResult, VemError> {
    fit_once_styled(x, spec, cfg, seed, WarmupStyle::Tempered)
}

fn fit_once_styled(
    x: &MixedDataMatrix,
    spec: ModelSpec,
    cfg: &VemConfig,
    seed: u64,
    style: WarmupStyle,
) -> Result<FitResult, VemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = init_memberships(x, spec, &mut rng)?;
    drive(x, spec, cfg, init, seed, style)
}

/// Multi-restart fit: `cfg.n_restarts` independent runs from sub-seeds
/// derived from `cfg.seed`, returning the run with the highest final
/// criterion. Failed restarts (empty clusters) count as negative infinity.
/// Even restarts use the tempered warm-up and odd restarts start directly
/// without one, so the pool covers both large-matrix starvation and the
/// symmetric-configuration trap. Restarts run in parallel; the selection is
/// by restart index order, so the result does not depend on the thread
/// schedule.
pub fn fit(x: &MixedDataMatrix, spec: ModelSpec, cfg: &VemConfig) -> Result<FitResult, VemError> {
    cfg.check().map_err(VemError::BadConfig)?;
    let runs: Vec<Result<FitResult, VemError>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            let style = if r % 2 == 0 { WarmupStyle::Tempered } else { WarmupStyle::Direct };
            fit_once_styled(x, spec, cfg, restart_seed(cfg.seed, r), style)
        })
        .collect();

    let mut best: Option<FitResult> = None;
    let mut last_err = String::new();
    for run in runs {
        match run {
            Ok(res) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| res.final_fc() > b.final_fc());
                if better {
                    best = Some(res);
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    best.ok_or(VemError::AllRestartsFailed { restarts: cfg.n_restarts, last: last_err })
}
