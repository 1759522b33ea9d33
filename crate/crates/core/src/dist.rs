//! Log-density kernels for the two block distribution families.
//!
//! Every likelihood computation in this crate stays in log space; raw
//! probabilities are only formed inside normalized softmax steps.

use crate::types::{ALPHA_EPS, VAR_FLOOR};

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian block parameter (mean, variance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBlockParam {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianBlockParam {
    pub fn new(mu: f64, sigma2: f64) -> Self {
        debug_assert!(sigma2 >= VAR_FLOOR);
        Self { mu, sigma2 }
    }
}

/// Bernoulli block parameter (success probability).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliBlockParam {
    pub alpha: f64,
}

impl BernoulliBlockParam {
    pub fn new(alpha: f64) -> Self {
        debug_assert!((ALPHA_EPS..=1.0 - ALPHA_EPS).contains(&alpha));
        Self { alpha }
    }
}

/// -1/2 ln(2 pi sigma^2) - (x - mu)^2 / (2 sigma^2)
#[inline]
pub fn gaussian_log_pdf(x: f64, p: GaussianBlockParam) -> f64 {
    let d = x - p.mu;
    -0.5 * (LN_2PI + p.sigma2.ln()) - d * d / (2.0 * p.sigma2)
}

/// x ln(alpha) + (1 - x) ln(1 - alpha) for x in {0, 1}.
#[inline]
pub fn bernoulli_log_pmf(x: f64, p: BernoulliBlockParam) -> f64 {
    debug_assert!(x == 0.0 || x == 1.0);
    x * p.alpha.ln() + (1.0 - x) * (1.0 - p.alpha).ln()
}
