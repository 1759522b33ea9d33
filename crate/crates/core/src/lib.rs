//! Co-clustering of mixed data tables (continuous + binary columns) with a
//! latent block model fitted by variational EM.
//!
//! A data table is partitioned simultaneously into row clusters, continuous
//! column clusters and binary column clusters. Each block at the intersection
//! of a row cluster and a column cluster is modelled by a single Gaussian
//! (continuous columns) or Bernoulli (binary columns) distribution. Fitting
//! maximises the variational lower bound `F_c` by coordinate ascent over the
//! soft memberships and the block parameters.
//!
//! Crate layout:
//! - [`types`]: the data matrix, soft/hard partitions and fitted parameters
//! - [`dist`]: Gaussian / Bernoulli log-density kernels
//! - [`model`]: the `F_c` criterion, the coordinate updates and an exact
//!   likelihood oracle for tiny instances
//! - [`vem`]: the alternating driver with warm-up and multi-restart search
//! - [`datagen`]: synthetic block-structured benchmark generators
//! - [`eval`]: adjusted Rand index and sample summaries

pub mod datagen;
pub mod dist;
pub mod eval;
pub mod math;
pub mod model;
pub mod types;
pub mod vem;

pub use datagen::{
    builtin_layouts, generate, layout_by_name, ConfusionLevel, ConfusionParams, GenConfig,
    GenError, LabeledDataset, LayoutTemplate, ParamChoice,
};
pub use dist::{bernoulli_log_pmf, gaussian_log_pdf, BernoulliBlockParam, GaussianBlockParam};
pub use eval::{ari, cross_ari, match_clusters, summarize, EvalError, Summary};
pub use model::{
    compute_fc, exact_log_likelihood, update_s, update_tc_td, update_theta, ClusterKind,
    ModelError, ModelSpec,
};
pub use types::{
    hard_assign, FitResult, HardPartition, MixedDataMatrix, ModelParams, SoftMemberships,
    ValidateError, ALPHA_EPS, VAR_FLOOR,
};
pub use vem::{fit, fit_from, fit_once, init_memberships, restart_seed, VemConfig, VemError};
