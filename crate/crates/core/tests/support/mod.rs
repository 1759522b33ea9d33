//! Shared helpers for the integration tests: an independent continuous-only
//! latent block model implementation (naive loops, no code shared with the
//! library's update path) and small statistics utilities.

#![allow(dead_code)]

use mlbm_core::{init_memberships, MixedDataMatrix, ModelSpec, VemConfig};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.8378770664093453;
const VAR_FLOOR: f64 = 1e-8;

pub struct RefFit {
    pub fc_trace: Vec<f64>,
    pub row_labels: Vec<usize>,
    pub converged: bool,
}

impl RefFit {
    pub fn final_fc(&self) -> f64 {
        *self.fc_trace.last().unwrap()
    }
}

struct RefParams {
    pi: Vec<f64>,
    rho: Vec<f64>,
    mu: Vec<Vec<f64>>,
    sig2: Vec<Vec<f64>>,
}

fn log_phi(x: f64, mu: f64, sig2: f64) -> f64 {
    -0.5 * (LN_2PI + sig2.ln()) - (x - mu) * (x - mu) / (2.0 * sig2)
}

fn theta_ref(x: &Array2<f64>, s: &[Vec<f64>], t: &[Vec<f64>]) -> Result<RefParams, String> {
    let (n, d) = x.dim();
    let g = s[0].len();
    let m = t[0].len();
    let mut s_mass = vec![0.0; g];
    for row in s {
        for (k, &v) in row.iter().enumerate() {
            s_mass[k] += v;
        }
    }
    let mut t_mass = vec![0.0; m];
    for row in t {
        for (l, &v) in row.iter().enumerate() {
            t_mass[l] += v;
        }
    }
    if s_mass.iter().chain(&t_mass).any(|&v| v < 1e-12) {
        return Err("empty cluster".into());
    }
    let pi = s_mass.iter().map(|&v| v / n as f64).collect();
    let rho = t_mass.iter().map(|&v| v / d as f64).collect();
    let mut mu = vec![vec![0.0; m]; g];
    let mut sig2 = vec![vec![0.0; m]; g];
    for k in 0..g {
        for l in 0..m {
            let mut wsum = 0.0;
            let mut xsum = 0.0;
            for i in 0..n {
                for j in 0..d {
                    let w = s[i][k] * t[j][l];
                    wsum += w;
                    xsum += w * x[[i, j]];
                }
            }
            let mean = xsum / wsum;
            let mut sq = 0.0;
            for i in 0..n {
                for j in 0..d {
                    let w = s[i][k] * t[j][l];
                    sq += w * (x[[i, j]] - mean) * (x[[i, j]] - mean);
                }
            }
            mu[k][l] = mean;
            sig2[k][l] = (sq / wsum).max(VAR_FLOOR);
        }
    }
    Ok(RefParams { pi, rho, mu, sig2 })
}

fn s_step_ref(x: &Array2<f64>, t: &[Vec<f64>], p: &RefParams, temp: f64) -> Vec<Vec<f64>> {
    let (n, d) = x.dim();
    let g = p.pi.len();
    let m = p.rho.len();
    let mut out = vec![vec![0.0; g]; n];
    for i in 0..n {
        let mut logits = vec![0.0; g];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = p.pi[k].ln();
            for j in 0..d {
                for l in 0..m {
                    acc += t[j][l] * log_phi(x[[i, j]], p.mu[k][l], p.sig2[k][l]);
                }
            }
            *logit = acc / temp;
        }
        softmax_ref(&logits, &mut out[i]);
    }
    out
}

fn t_step_ref(x: &Array2<f64>, s: &[Vec<f64>], p: &RefParams, temp: f64) -> Vec<Vec<f64>> {
    let (n, d) = x.dim();
    let g = p.pi.len();
    let m = p.rho.len();
    let mut out = vec![vec![0.0; m]; d];
    for j in 0..d {
        let mut logits = vec![0.0; m];
        for (l, logit) in logits.iter_mut().enumerate() {
            let mut acc = p.rho[l].ln();
            for i in 0..n {
                for k in 0..g {
                    acc += s[i][k] * log_phi(x[[i, j]], p.mu[k][l], p.sig2[k][l]);
                }
            }
            *logit = acc / temp;
        }
        softmax_ref(&logits, &mut out[j]);
    }
    out
}

fn softmax_ref(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|&v| (v - m).exp()).sum();
    for (slot, &logit) in out.iter_mut().zip(logits) {
        *slot = (logit - m).exp() / total;
    }
}

fn fc_ref(x: &Array2<f64>, s: &[Vec<f64>], t: &[Vec<f64>], p: &RefParams) -> f64 {
    let (n, d) = x.dim();
    let g = p.pi.len();
    let m = p.rho.len();
    let mut fc = 0.0;
    for row in s {
        for (k, &v) in row.iter().enumerate() {
            if v > 0.0 {
                fc += v * p.pi[k].ln() - v * v.ln();
            }
        }
    }
    for row in t {
        for (l, &v) in row.iter().enumerate() {
            if v > 0.0 {
                fc += v * p.rho[l].ln() - v * v.ln();
            }
        }
    }
    for i in 0..n {
        for j in 0..d {
            for k in 0..g {
                for l in 0..m {
                    fc += s[i][k] * t[j][l] * log_phi(x[[i, j]], p.mu[k][l], p.sig2[k][l]);
                }
            }
        }
    }
    fc
}

fn damp_ref(current: &mut [Vec<f64>], fresh: Vec<Vec<f64>>, lambda: f64) {
    for (old_row, new_row) in current.iter_mut().zip(fresh) {
        for (old, new) in old_row.iter_mut().zip(new_row) {
            *old = (1.0 - lambda) * *old + lambda * new;
        }
    }
}

/// Standalone continuous latent block model fit. Mirrors the library driver
/// (same warm-up semantics, stability thresholds and initialization stream)
/// but every update formula and the criterion are re-implemented with naive
/// per-cell loops.
pub fn reference_continuous_fit(
    x: &Array2<f64>,
    g: usize,
    m: usize,
    cfg: &VemConfig,
    seed: u64,
) -> Result<RefFit, String> {
    let data = MixedDataMatrix::new(x.clone(), Array2::zeros((x.nrows(), 0))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = init_memberships(&data, ModelSpec::new(g, m, 0), &mut rng)
        .map_err(|e| e.to_string())?;
    let mut s: Vec<Vec<f64>> = init.s.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut t: Vec<Vec<f64>> = init.tc.rows().into_iter().map(|r| r.to_vec()).collect();

    let mut params = theta_ref(x, &s, &t)?;
    let mut trace = Vec::new();
    let mut fc_last: Option<f64> = None;
    let mut fc_prev_outer: Option<f64> = None;
    let mut converged = false;

    let row_temp = x.ncols().max(1) as f64;
    let col_temp = x.nrows().max(1) as f64;

    for outer in 0..cfg.max_outer {
        let warmup = outer < cfg.warmup_steps;
        let lambda = if warmup { cfg.warmup_damping } else { 1.0 };
        let steps = if warmup { 1 } else { cfg.max_inner };

        for _ in 0..steps {
            let fresh = s_step_ref(x, &t, &params, if warmup { row_temp } else { 1.0 });
            damp_ref(&mut s, fresh, lambda);
            params = theta_ref(x, &s, &t)?;
            if !warmup {
                let fc = fc_ref(x, &s, &t, &params);
                let stable =
                    fc_last.is_some_and(|p| (fc - p).abs() <= cfg.eps_inner * (1.0 + fc.abs()));
                fc_last = Some(fc);
                if stable {
                    break;
                }
            }
        }
        for _ in 0..steps {
            let fresh = t_step_ref(x, &s, &params, if warmup { col_temp } else { 1.0 });
            damp_ref(&mut t, fresh, lambda);
            params = theta_ref(x, &s, &t)?;
            if !warmup {
                let fc = fc_ref(x, &s, &t, &params);
                let stable =
                    fc_last.is_some_and(|p| (fc - p).abs() <= cfg.eps_inner * (1.0 + fc.abs()));
                fc_last = Some(fc);
                if stable {
                    break;
                }
            }
        }

        let fc_outer = fc_ref(x, &s, &t, &params);
        trace.push(fc_outer);
        if !warmup && outer + 1 >= cfg.min_outer {
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

    let row_labels = s
        .iter()
        .map(|row| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (k, &v) in row.iter().enumerate() {
                if v > best_v {
                    best = k;
                    best_v = v;
                }
            }
            best
        })
        .collect();
    Ok(RefFit { fc_trace: trace, row_labels, converged })
}

/// Brute-force ARI over all item pairs (the oracle for the pair-counting
/// contingency implementation).
pub fn ari_pair_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut n11, mut n00, mut n10, mut n01) = (0f64, 0f64, 0f64, 0f64);
    for p in 0..n {
        for q in (p + 1)..n {
            match (a[p] == a[q], b[p] == b[q]) {
                (true, true) => n11 += 1.0,
                (false, false) => n00 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
            }
        }
    }
    let denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (n11 * n00 - n10 * n01) / denom
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
