//! The mixed-data latent block model: the variational criterion `F_c`, the
//! three coordinate updates it is maximised by, and an exhaustive-enumeration
//! likelihood oracle for tiny instances.
//!
//! All operations are pure (inputs are borrowed, outputs freshly allocated)
//! and use fixed summation orders, so results do not depend on how callers
//! schedule them across threads.

use ndarray::Array2;
use thiserror::Error;

use crate::math::{log_sum_exp, xlogx, KahanSum};
use crate::types::{MixedDataMatrix, ModelParams, SoftMemberships, ALPHA_EPS, VAR_FLOOR};

const LN_2PI: f64 = 1.8378770664093453;

/// Which family of clusters a diagnostic refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterKind {
    Row,
    ContinuousColumn,
    BinaryColumn,
}

impl std::fmt::Display for ClusterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterKind::Row => write!(f, "row"),
            ClusterKind::ContinuousColumn => write!(f, "continuous-column"),
            ClusterKind::BinaryColumn => write!(f, "binary-column"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{kind} cluster {index} has vanishing membership mass")]
    EmptyCluster { kind: ClusterKind, index: usize },
    #[error("exact likelihood needs {required:.3e} assignments, cap is {cap:.1e}")]
    InstanceTooLarge { required: f64, cap: f64 },
}

/// Cluster counts: `g` row clusters, `m_c` continuous column clusters and
/// `m_d` binary column clusters. A column family with zero columns must have
/// zero clusters and vice versa.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub g: usize,
    pub m_c: usize,
    pub m_d: usize,
}

impl ModelSpec {
    pub fn new(g: usize, m_c: usize, m_d: usize) -> Self {
        Self { g, m_c, m_d }
    }

    /// Validates the spec against a data matrix.
    pub fn check_against(&self, x: &MixedDataMatrix) -> Result<(), ModelError> {
        if self.g < 1 {
            return Err(ModelError::DimensionMismatch("g must be >= 1".into()));
        }
        if self.m_c + self.m_d < 1 {
            return Err(ModelError::DimensionMismatch("m_c + m_d must be >= 1".into()));
        }
        if (x.d_c() > 0) != (self.m_c > 0) {
            return Err(ModelError::DimensionMismatch(format!(
                "d_c = {} requires m_c {} 0 (got {})",
                x.d_c(),
                if x.d_c() > 0 { ">" } else { "=" },
                self.m_c
            )));
        }
        if (x.d_d() > 0) != (self.m_d > 0) {
            return Err(ModelError::DimensionMismatch(format!(
                "d_d = {} requires m_d {} 0 (got {})",
                x.d_d(),
                if x.d_d() > 0 { ">" } else { "=" },
                self.m_d
            )));
        }
        Ok(())
    }
}

fn check_dims(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: Option<&ModelParams>,
) -> Result<(), ModelError> {
    let n = x.n();
    if m.s.nrows() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "s has {} rows, data has {n}",
            m.s.nrows()
        )));
    }
    if m.tc.nrows() != x.d_c() {
        return Err(ModelError::DimensionMismatch(format!(
            "tc has {} rows, data has {} continuous columns",
            m.tc.nrows(),
            x.d_c()
        )));
    }
    if m.td.nrows() != x.d_d() {
        return Err(ModelError::DimensionMismatch(format!(
            "td has {} rows, data has {} binary columns",
            m.td.nrows(),
            x.d_d()
        )));
    }
    if let Some(p) = params {
        let (g, m_c, m_d) = (m.s.ncols(), m.tc.ncols(), m.td.ncols());
        if p.g() != g || p.m_c() != m_c || p.m_d() != m_d {
            return Err(ModelError::DimensionMismatch(format!(
                "params are ({}, {}, {}), memberships are ({g}, {m_c}, {m_d})",
                p.g(),
                p.m_c(),
                p.m_d()
            )));
        }
        if p.mu.dim() != (g, m_c) || p.sigma2.dim() != (g, m_c) || p.alpha.dim() != (g, m_d) {
            return Err(ModelError::DimensionMismatch("block parameter shapes".into()));
        }
    }
    Ok(())
}

/// Per-row aggregates of the column memberships, shared by the criterion and
/// the row update: `a[i][l] = sum_j t[j][l] x[i][j]`, `b` likewise with x^2,
/// `t_mass[l] = sum_j t[j][l]`.
struct ColSide {
    a: Array2<f64>,
    b: Array2<f64>,
    t_mass: Vec<f64>,
}

fn col_side(x: &Array2<f64>, t: &Array2<f64>, with_squares: bool) -> ColSide {
    let (n, d) = x.dim();
    let m = t.ncols();
    let mut a = Array2::<f64>::zeros((n, m));
    let mut b = Array2::<f64>::zeros((n, m));
    for i in 0..n {
        let xr = x.row(i);
        let mut ar = a.row_mut(i);
        let mut br = b.row_mut(i);
        for j in 0..d {
            let v = xr[j];
            let tr = t.row(j);
            for l in 0..m {
                ar[l] += tr[l] * v;
            }
            if with_squares {
                let v2 = v * v;
                for l in 0..m {
                    br[l] += tr[l] * v2;
                }
            }
        }
    }
    let t_mass = (0..m).map(|l| t.column(l).sum()).collect();
    ColSide { a, b, t_mass }
}

/// Block moments weighted by both membership sides:
/// `m1[k][l] = sum_i s[i][k] a[i][l]` (and `m2` from `b`).
fn block_moments(s: &Array2<f64>, cs: &ColSide, with_squares: bool) -> (Array2<f64>, Array2<f64>) {
    let (n, g) = s.dim();
    let m = cs.a.ncols();
    let mut m1 = Array2::<f64>::zeros((g, m));
    let mut m2 = Array2::<f64>::zeros((g, m));
    for k in 0..g {
        for l in 0..m {
            let mut acc1 = KahanSum::new();
            let mut acc2 = KahanSum::new();
            for i in 0..n {
                let w = s[[i, k]];
                acc1.add(w * cs.a[[i, l]]);
                if with_squares {
                    acc2.add(w * cs.b[[i, l]]);
                }
            }
            m1[[k, l]] = acc1.value();
            m2[[k, l]] = acc2.value();
        }
    }
    (m1, m2)
}

fn row_mass(s: &Array2<f64>) -> Vec<f64> {
    (0..s.ncols()).map(|k| s.column(k).sum()).collect()
}

fn entropy(m: &Array2<f64>) -> f64 {
    m.iter().map(|&v| xlogx(v)).sum()
}

/// The variational lower bound on the log-likelihood.
///
/// Sum of the three mixing-proportion terms and the two expected block
/// log-likelihood terms, minus the three membership entropy terms, with the
/// convention 0 ln 0 = 0 throughout.
pub fn compute_fc(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    check_dims(x, m, Some(params))?;
    let s_mass = row_mass(&m.s);
    let mut fc = 0.0;
    for (k, &mass) in s_mass.iter().enumerate() {
        if mass > 0.0 {
            fc += mass * params.pi[k].ln();
        }
    }

    if x.d_c() > 0 {
        let cs = col_side(x.continuous(), &m.tc, true);
        for (l, &mass) in cs.t_mass.iter().enumerate() {
            if mass > 0.0 {
                fc += mass * params.rho_c[l].ln();
            }
        }
        let (m1, m2) = block_moments(&m.s, &cs, true);
        for k in 0..params.g() {
            for l in 0..params.m_c() {
                let w = s_mass[k] * cs.t_mass[l];
                let mu = params.mu[[k, l]];
                let s2 = params.sigma2[[k, l]];
                let sq = m2[[k, l]] - 2.0 * mu * m1[[k, l]] + mu * mu * w;
                fc += -0.5 * (LN_2PI + s2.ln()) * w - sq / (2.0 * s2);
            }
        }
    }

    if x.d_d() > 0 {
        let cs = col_side(x.binary(), &m.td, false);
        for (l, &mass) in cs.t_mass.iter().enumerate() {
            if mass > 0.0 {
                fc += mass * params.rho_d[l].ln();
            }
        }
        let (m1, _) = block_moments(&m.s, &cs, false);
        for k in 0..params.g() {
            for l in 0..params.m_d() {
                let w = s_mass[k] * cs.t_mass[l];
                let alpha = params.alpha[[k, l]];
                fc += m1[[k, l]] * alpha.ln() + (w - m1[[k, l]]) * (1.0 - alpha).ln();
            }
        }
    }

    fc -= entropy(&m.s) + entropy(&m.tc) + entropy(&m.td);
    Ok(fc)
}

/// Row membership update: `s_hat[i][k]` proportional to
/// `pi_k * exp(sum tc log phi_c) * exp(sum td log phi_d)`, normalized per row
/// in log space.
pub fn update_s(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: &ModelParams,
) -> Result<Array2<f64>, ModelError> {
    update_s_tempered(x, m, params, 1.0)
}

/// `update_s` with the logits divided by `temperature` before the softmax.
/// Temperatures above 1 keep the assignments soft while the block parameters
/// are still undifferentiated; the warm-up phase relies on this.
pub(crate) fn update_s_tempered(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: &ModelParams,
    temperature: f64,
) -> Result<Array2<f64>, ModelError> {
    check_dims(x, m, Some(params))?;
    let n = x.n();
    let g = params.g();
    let cont = (x.d_c() > 0).then(|| col_side(x.continuous(), &m.tc, true));
    let bin = (x.d_d() > 0).then(|| col_side(x.binary(), &m.td, false));

    let mut out = Array2::<f64>::zeros((n, g));
    let mut logits = vec![0.0; g];
    for i in 0..n {
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = params.pi[k].ln();
            if let Some(cs) = &cont {
                for l in 0..params.m_c() {
                    let mu = params.mu[[k, l]];
                    let s2 = params.sigma2[[k, l]];
                    let sq = cs.b[[i, l]] - 2.0 * mu * cs.a[[i, l]] + mu * mu * cs.t_mass[l];
                    acc += -0.5 * (LN_2PI + s2.ln()) * cs.t_mass[l] - sq / (2.0 * s2);
                }
            }
            if let Some(cs) = &bin {
                for l in 0..params.m_d() {
                    let alpha = params.alpha[[k, l]];
                    acc += cs.a[[i, l]] * alpha.ln()
                        + (cs.t_mass[l] - cs.a[[i, l]]) * (1.0 - alpha).ln();
                }
            }
            *logit = acc / temperature;
        }
        normalize_into(&logits, out.row_mut(i));
    }
    Ok(out)
}

/// Column membership updates for both families. The two are independent
/// given the row memberships, so they are computed in one pass.
pub fn update_tc_td(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: &ModelParams,
) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
    update_tc_td_tempered(x, m, params, 1.0)
}

/// `update_tc_td` with tempered logits (see [`update_s_tempered`]).
pub(crate) fn update_tc_td_tempered(
    x: &MixedDataMatrix,
    m: &SoftMemberships,
    params: &ModelParams,
    temperature: f64,
) -> Result<(Array2<f64>, Array2<f64>), ModelError> {
    check_dims(x, m, Some(params))?;
    let s_mass = row_mass(&m.s);
    let g = params.g();

    let tc = if x.d_c() > 0 {
        let xc = x.continuous();
        let d = x.d_c();
        let m_c = params.m_c();
        // u[j][k] = sum_i s[i][k] x[i][j], v likewise with x^2
        let mut u = Array2::<f64>::zeros((d, g));
        let mut v = Array2::<f64>::zeros((d, g));
        for i in 0..x.n() {
            let xr = xc.row(i);
            let sr = m.s.row(i);
            for j in 0..d {
                let val = xr[j];
                let val2 = val * val;
                for k in 0..g {
                    u[[j, k]] += sr[k] * val;
                    v[[j, k]] += sr[k] * val2;
                }
            }
        }
        let mut out = Array2::<f64>::zeros((d, m_c));
        let mut logits = vec![0.0; m_c];
        for j in 0..d {
            for (l, logit) in logits.iter_mut().enumerate() {
                let mut acc = params.rho_c[l].ln();
                for k in 0..g {
                    let mu = params.mu[[k, l]];
                    let s2 = params.sigma2[[k, l]];
                    let sq = v[[j, k]] - 2.0 * mu * u[[j, k]] + mu * mu * s_mass[k];
                    acc += -0.5 * (LN_2PI + s2.ln()) * s_mass[k] - sq / (2.0 * s2);
                }
                *logit = acc / temperature;
            }
            normalize_into(&logits, out.row_mut(j));
        }
        out
    } else {
        Array2::zeros((0, 0))
    };

    let td = if x.d_d() > 0 {
        let xb = x.binary();
        let d = x.d_d();
        let m_d = params.m_d();
        let mut u = Array2::<f64>::zeros((d, g));
        for i in 0..x.n() {
            let xr = xb.row(i);
            let sr = m.s.row(i);
            for j in 0..d {
                let val = xr[j];
                for k in 0..g {
                    u[[j, k]] += sr[k] * val;
                }
            }
        }
        let mut out = Array2::<f64>::zeros((d, m_d));
        let mut logits = vec![0.0; m_d];
        for j in 0..d {
            for (l, logit) in logits.iter_mut().enumerate() {
                let mut acc = params.rho_d[l].ln();
                for k in 0..g {
                    let alpha = params.alpha[[k, l]];
                    acc += u[[j, k]] * alpha.ln() + (s_mass[k] - u[[j, k]]) * (1.0 - alpha).ln();
                }
                *logit = acc / temperature;
            }
            normalize_into(&logits, out.row_mut(j));
        }
        out
    } else {
        Array2::zeros((0, 0))
    };

    Ok((tc, td))
}

fn normalize_into(logits: &[f64], mut row: ndarray::ArrayViewMut1<'_, f64>) {
    let lse = log_sum_exp(logits);
    for (slot, &logit) in row.iter_mut().zip(logits) {
        *slot = (logit - lse).exp();
    }
}

/// M-step: mixing proportions from membership masses, block means/variances
/// and Bernoulli rates from membership-weighted moments. The variance is
/// taken around the freshly updated mean (two-moment formula) and clamped to
/// [`VAR_FLOOR`]; Bernoulli rates are clamped to `[ALPHA_EPS, 1 - ALPHA_EPS]`.
///
/// A cluster whose total membership mass falls below 1e-12 makes the
/// weighted moments meaningless; this is reported as [`ModelError::EmptyCluster`]
/// and the caller decides whether to restart.
pub fn update_theta(x: &MixedDataMatrix, m: &SoftMemberships) -> Result<ModelParams, ModelError> {
    check_dims(x, m, None)?;
    const MASS_EPS: f64 = 1e-12;
    let n = x.n();
    let g = m.s.ncols();

    let s_mass = row_mass(&m.s);
    for (k, &mass) in s_mass.iter().enumerate() {
        if mass < MASS_EPS {
            return Err(ModelError::EmptyCluster { kind: ClusterKind::Row, index: k });
        }
    }
    let pi = s_mass.iter().map(|&v| v / n as f64).collect();

    let (rho_c, mu, sigma2) = if x.d_c() > 0 {
        let cs = col_side(x.continuous(), &m.tc, true);
        for (l, &mass) in cs.t_mass.iter().enumerate() {
            if mass < MASS_EPS {
                return Err(ModelError::EmptyCluster {
                    kind: ClusterKind::ContinuousColumn,
                    index: l,
                });
            }
        }
        let m_c = m.tc.ncols();
        let (m1, m2) = block_moments(&m.s, &cs, true);
        let mut mu = Array2::<f64>::zeros((g, m_c));
        let mut sigma2 = Array2::<f64>::zeros((g, m_c));
        for k in 0..g {
            for l in 0..m_c {
                let w = s_mass[k] * cs.t_mass[l];
                let mean = m1[[k, l]] / w;
                mu[[k, l]] = mean;
                sigma2[[k, l]] = (m2[[k, l]] / w - mean * mean).max(VAR_FLOOR);
            }
        }
        let rho_c = cs.t_mass.iter().map(|&v| v / x.d_c() as f64).collect();
        (rho_c, mu, sigma2)
    } else {
        (Vec::new(), Array2::zeros((g, 0)), Array2::zeros((g, 0)))
    };

    let (rho_d, alpha) = if x.d_d() > 0 {
        let cs = col_side(x.binary(), &m.td, false);
        for (l, &mass) in cs.t_mass.iter().enumerate() {
            if mass < MASS_EPS {
                return Err(ModelError::EmptyCluster {
                    kind: ClusterKind::BinaryColumn,
                    index: l,
                });
            }
        }
        let m_d = m.td.ncols();
        let (m1, _) = block_moments(&m.s, &cs, false);
        let mut alpha = Array2::<f64>::zeros((g, m_d));
        for k in 0..g {
            for l in 0..m_d {
                let w = s_mass[k] * cs.t_mass[l];
                alpha[[k, l]] = (m1[[k, l]] / w).clamp(ALPHA_EPS, 1.0 - ALPHA_EPS);
            }
        }
        let rho_d = cs.t_mass.iter().map(|&v| v / x.d_d() as f64).collect();
        (rho_d, alpha)
    } else {
        (Vec::new(), Array2::zeros((g, 0)))
    };

    Ok(ModelParams { pi, rho_c, rho_d, mu, sigma2, alpha })
}

/// Log-likelihood by exhaustive enumeration of every joint assignment of
/// rows and columns to clusters. Only feasible on tiny instances; the cost
/// is `g^n * m_c^d_c * m_d^d_d` assignment evaluations.
pub fn exact_log_likelihood(
    x: &MixedDataMatrix,
    params: &ModelParams,
    spec: ModelSpec,
) -> Result<f64, ModelError> {
    spec.check_against(x)?;
    if params.g() != spec.g || params.m_c() != spec.m_c || params.m_d() != spec.m_d {
        return Err(ModelError::DimensionMismatch("params do not match spec".into()));
    }
    const CAP: f64 = 1e7;
    let (n, d_c, d_d) = (x.n(), x.d_c(), x.d_d());
    let required = (spec.g as f64).powi(n as i32)
        * if d_c > 0 { (spec.m_c as f64).powi(d_c as i32) } else { 1.0 }
        * if d_d > 0 { (spec.m_d as f64).powi(d_d as i32) } else { 1.0 };
    if required > CAP || required.is_nan() {
        return Err(ModelError::InstanceTooLarge { required, cap: CAP });
    }

    // Per-cell log densities, indexed [i][j][k][l].
    let lgc = table(n, d_c, spec.g, spec.m_c, |i, j, k, l| {
        let mu = params.mu[[k, l]];
        let s2 = params.sigma2[[k, l]];
        let d = x.continuous()[[i, j]] - mu;
        -0.5 * (LN_2PI + s2.ln()) - d * d / (2.0 * s2)
    });
    let lgd = table(n, d_d, spec.g, spec.m_d, |i, j, k, l| {
        let alpha = params.alpha[[k, l]];
        let v = x.binary()[[i, j]];
        v * alpha.ln() + (1.0 - v) * (1.0 - alpha).ln()
    });

    // Streaming log-sum-exp over every assignment.
    let mut running_max = f64::NEG_INFINITY;
    let mut scaled_sum = 0.0;
    let mut z = vec![0usize; n];
    loop {
        let lp_rows: f64 = z.iter().map(|&k| params.pi[k].ln()).sum();
        let mut wc = vec![0usize; d_c];
        loop {
            let mut lp_c: f64 = wc.iter().map(|&l| params.rho_c[l].ln()).sum();
            for (i, &k) in z.iter().enumerate() {
                for (j, &l) in wc.iter().enumerate() {
                    lp_c += lgc[idx4(i, j, k, l, d_c, spec.g, spec.m_c)];
                }
            }
            let mut wd = vec![0usize; d_d];
            loop {
                let mut lp: f64 = lp_rows + lp_c;
                lp += wd.iter().map(|&l| params.rho_d[l].ln()).sum::<f64>();
                for (i, &k) in z.iter().enumerate() {
                    for (j, &l) in wd.iter().enumerate() {
                        lp += lgd[idx4(i, j, k, l, d_d, spec.g, spec.m_d)];
                    }
                }
                // streaming lse
                if lp > running_max {
                    scaled_sum = scaled_sum * (running_max - lp).exp() + 1.0;
                    running_max = lp;
                } else {
                    scaled_sum += (lp - running_max).exp();
                }
                if !next_assignment(&mut wd, spec.m_d) {
                    break;
                }
            }
            if !next_assignment(&mut wc, spec.m_c) {
                break;
            }
        }
        if !next_assignment(&mut z, spec.g) {
            break;
        }
    }
    Ok(running_max + scaled_sum.ln())
}

fn table(
    n: usize,
    d: usize,
    g: usize,
    m: usize,
    f: impl Fn(usize, usize, usize, usize) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; n * d * g * m];
    for i in 0..n {
        for j in 0..d {
            for k in 0..g {
                for l in 0..m {
                    out[idx4(i, j, k, l, d, g, m)] = f(i, j, k, l);
                }
            }
        }
    }
    out
}

#[inline]
fn idx4(i: usize, j: usize, k: usize, l: usize, d: usize, g: usize, m: usize) -> usize {
    ((i * d + j) * g + k) * m + l
}

/// Advances a mixed-radix counter; returns false once it wraps around.
fn next_assignment(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}
