//! Synthetic block-structured benchmark data.
//!
//! A generator configuration picks one of two parameter values for every
//! (row cluster, column cluster) block; the confusion level maps those picks
//! to concrete Gaussian / Bernoulli parameters controlling block overlap.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::types::{HardPartition, MixedDataMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("unknown layout '{0}'")]
    UnknownLayout(String),
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
}

/// Overlap level between block distributions. Gaussian blocks always use
/// means 1 and 2; the level sets the common standard deviation and the pair
/// of Bernoulli rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfusionLevel {
    Low,
    Medium,
    High,
}

/// Concrete parameter values carried by a confusion level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfusionParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ConfusionLevel {
    pub fn params(self) -> ConfusionParams {
        match self {
            ConfusionLevel::Low => {
                ConfusionParams { mu1: 1.0, mu2: 2.0, sigma: 0.25, alpha1: 0.2, alpha2: 0.8 }
            }
            ConfusionLevel::Medium => {
                ConfusionParams { mu1: 1.0, mu2: 2.0, sigma: 0.5, alpha1: 0.3, alpha2: 0.7 }
            }
            ConfusionLevel::High => {
                ConfusionParams { mu1: 1.0, mu2: 2.0, sigma: 1.0, alpha1: 0.4, alpha2: 0.6 }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConfusionLevel::Low => "low",
            ConfusionLevel::Medium => "medium",
            ConfusionLevel::High => "high",
        }
    }

    pub fn parse(s: &str) -> Result<Self, GenError> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(ConfusionLevel::Low),
            "medium" => Ok(ConfusionLevel::Medium),
            "high" => Ok(ConfusionLevel::High),
            other => Err(GenError::LayoutMismatch(format!("unknown confusion level '{other}'"))),
        }
    }

    pub const ALL: [ConfusionLevel; 3] =
        [ConfusionLevel::Low, ConfusionLevel::Medium, ConfusionLevel::High];
}

/// Which of the two per-level parameter values a block uses
/// (mu1/mu2 for Gaussian blocks, alpha1/alpha2 for Bernoulli blocks).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamChoice {
    P1,
    P2,
}

impl ParamChoice {
    fn mu(self, p: ConfusionParams) -> f64 {
        match self {
            ParamChoice::P1 => p.mu1,
            ParamChoice::P2 => p.mu2,
        }
    }

    fn alpha(self, p: ConfusionParams) -> f64 {
        match self {
            ParamChoice::P1 => p.alpha1,
            ParamChoice::P2 => p.alpha2,
        }
    }
}

/// Full description of one synthetic dataset: sizes, block parameter tables,
/// confusion level, cluster size proportions and the sampling seed.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub d_c: usize,
    pub d_d: usize,
    /// g x m_c table for the continuous blocks.
    pub continuous_layout: Vec<Vec<ParamChoice>>,
    /// g x m_d table for the binary blocks.
    pub binary_layout: Vec<Vec<ParamChoice>>,
    pub confusion: ConfusionLevel,
    pub row_proportions: Vec<f64>,
    pub ccol_proportions: Vec<f64>,
    pub bcol_proportions: Vec<f64>,
    pub seed: u64,
    /// Test hook: overrides the confusion level's sigma (0 makes every
    /// continuous cell equal its block mean).
    pub sigma_override: Option<f64>,
}

impl GenConfig {
    pub fn g(&self) -> usize {
        self.continuous_layout.len().max(self.binary_layout.len())
    }

    pub fn m_c(&self) -> usize {
        self.continuous_layout.first().map_or(0, Vec::len)
    }

    pub fn m_d(&self) -> usize {
        self.binary_layout.first().map_or(0, Vec::len)
    }

    pub fn check(&self) -> Result<(), GenError> {
        let g = self.g();
        if g == 0 || self.n == 0 {
            return Err(GenError::LayoutMismatch("need at least one row cluster and one row".into()));
        }
        if !self.continuous_layout.is_empty() && self.continuous_layout.len() != g
            || !self.binary_layout.is_empty() && self.binary_layout.len() != g
        {
            return Err(GenError::LayoutMismatch(
                "continuous and binary tables disagree on the row cluster count".into(),
            ));
        }
        if self.continuous_layout.iter().any(|r| r.len() != self.m_c())
            || self.binary_layout.iter().any(|r| r.len() != self.m_d())
        {
            return Err(GenError::LayoutMismatch("ragged block parameter table".into()));
        }
        if (self.d_c > 0) != (self.m_c() > 0) || (self.d_d > 0) != (self.m_d() > 0) {
            return Err(GenError::LayoutMismatch(
                "column counts and layout widths must be zero together".into(),
            ));
        }
        if self.d_c + self.d_d == 0 {
            return Err(GenError::LayoutMismatch("no columns at all".into()));
        }
        for (name, props, count, len) in [
            ("row", &self.row_proportions, g, self.n),
            ("continuous column", &self.ccol_proportions, self.m_c(), self.d_c),
            ("binary column", &self.bcol_proportions, self.m_d(), self.d_d),
        ] {
            if props.len() != count {
                return Err(GenError::LayoutMismatch(format!(
                    "{name} proportions have {} entries, expected {count}",
                    props.len()
                )));
            }
            if count == 0 {
                continue;
            }
            if props.iter().any(|&p| p <= 0.0) {
                return Err(GenError::LayoutMismatch(format!("{name} proportions must be positive")));
            }
            let total: f64 = props.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(GenError::LayoutMismatch(format!("{name} proportions sum to {total}")));
            }
            if len < count {
                return Err(GenError::LayoutMismatch(format!(
                    "{name}s: {len} items cannot cover {count} clusters"
                )));
            }
        }
        Ok(())
    }
}

/// A generated dataset together with its ground-truth labels and the
/// configuration that produced it.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub data: MixedDataMatrix,
    pub truth: HardPartition,
    pub config: GenConfig,
}

/// Largest-remainder split of `total` items over `props`; ties go to the
/// lowest cluster index, every cluster gets at least one item.
fn cluster_sizes(total: usize, props: &[f64]) -> Vec<usize> {
    let k = props.len();
    if k == 0 {
        return Vec::new();
    }
    let target: Vec<f64> = props.iter().map(|p| p * total as f64).collect();
    let mut sizes: Vec<usize> = target.iter().map(|t| (t.floor() as usize).max(1)).collect();
    while sizes.iter().sum::<usize>() > total {
        // shrink the most over-allocated cluster that can still spare an item
        let mut pick = None;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..k {
            let over = sizes[i] as f64 - target[i];
            if sizes[i] > 1 && over > worst {
                worst = over;
                pick = Some(i);
            }
        }
        sizes[pick.expect("total >= cluster count")] -= 1;
    }
    while sizes.iter().sum::<usize>() < total {
        let mut pick = 0;
        let mut worst = f64::INFINITY;
        for i in 0..k {
            let over = sizes[i] as f64 - target[i];
            if over < worst {
                worst = over;
                pick = i;
            }
        }
        sizes[pick] += 1;
    }
    sizes
}

fn contiguous_labels(sizes: &[usize]) -> Vec<usize> {
    let mut labels = Vec::with_capacity(sizes.iter().sum());
    for (cluster, &size) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(cluster, size));
    }
    labels
}

/// Samples a dataset: rows/columns are assigned to clusters contiguously by
/// the size proportions, every cell is drawn from its block distribution,
/// then row and column orders are shuffled (seeded), labels along with them.
pub fn generate(cfg: &GenConfig) -> Result<LabeledDataset, GenError> {
    cfg.check()?;
    let p = cfg.confusion.params();
    let sigma = cfg.sigma_override.unwrap_or(p.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let row_labels = contiguous_labels(&cluster_sizes(cfg.n, &cfg.row_proportions));
    let ccol_labels = contiguous_labels(&cluster_sizes(cfg.d_c, &cfg.ccol_proportions));
    let bcol_labels = contiguous_labels(&cluster_sizes(cfg.d_d, &cfg.bcol_proportions));

    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("valid sigma"));
    let mut continuous = Array2::<f64>::zeros((cfg.n, cfg.d_c));
    for i in 0..cfg.n {
        for j in 0..cfg.d_c {
            let mean = cfg.continuous_layout[row_labels[i]][ccol_labels[j]].mu(p);
            continuous[[i, j]] = match &normal {
                Some(nd) => mean + nd.sample(&mut rng),
                None => mean,
            };
        }
    }
    let mut binary = Array2::<f64>::zeros((cfg.n, cfg.d_d));
    for i in 0..cfg.n {
        for j in 0..cfg.d_d {
            let alpha = cfg.binary_layout[row_labels[i]][bcol_labels[j]].alpha(p);
            binary[[i, j]] = f64::from(rng.random::<f64>() < alpha);
        }
    }

    let row_perm = permutation(&mut rng, cfg.n);
    let ccol_perm = permutation(&mut rng, cfg.d_c);
    let bcol_perm = permutation(&mut rng, cfg.d_d);

    let data = MixedDataMatrix::new(
        permute(&continuous, &row_perm, &ccol_perm),
        permute(&binary, &row_perm, &bcol_perm),
    )
    .expect("generated data satisfies the matrix invariants");
    let truth = HardPartition {
        row_labels: apply_perm(&row_labels, &row_perm),
        ccol_labels: apply_perm(&ccol_labels, &ccol_perm),
        bcol_labels: apply_perm(&bcol_labels, &bcol_perm),
    };
    Ok(LabeledDataset { data, truth, config: cfg.clone() })
}

/// `out[i] = src[perm[i]]`.
fn permutation(rng: &mut impl Rng, len: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(rng);
    p
}

fn apply_perm<T: Copy>(src: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| src[i]).collect()
}

fn permute(src: &Array2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((rows.len(), cols.len()));
    for (i, &si) in rows.iter().enumerate() {
        for (j, &sj) in cols.iter().enumerate() {
            out[[i, j]] = src[[si, sj]];
        }
    }
    out
}

/// A named experiment design: cluster counts plus the block parameter tables,
/// instantiated into a [`GenConfig`] by supplying sizes, confusion and seed.
#[derive(Clone, Debug)]
pub struct LayoutTemplate {
    pub name: &'static str,
    pub g: usize,
    pub m_c: usize,
    pub m_d: usize,
    pub continuous_layout: Vec<Vec<ParamChoice>>,
    pub binary_layout: Vec<Vec<ParamChoice>>,
}

impl LayoutTemplate {
    /// Equal cluster proportions; `d_c`/`d_d` are the column counts of each
    /// family.
    pub fn config(
        &self,
        n: usize,
        d_c: usize,
        d_d: usize,
        confusion: ConfusionLevel,
        seed: u64,
    ) -> GenConfig {
        GenConfig {
            n,
            d_c,
            d_d,
            continuous_layout: self.continuous_layout.clone(),
            binary_layout: self.binary_layout.clone(),
            confusion,
            row_proportions: vec![1.0 / self.g as f64; self.g],
            ccol_proportions: vec![1.0 / self.m_c as f64; self.m_c],
            bcol_proportions: vec![1.0 / self.m_d as f64; self.m_d],
            seed,
            sigma_override: None,
        }
    }

    /// Square variant: as many columns of each family as rows.
    pub fn square_config(&self, n: usize, confusion: ConfusionLevel, seed: u64) -> GenConfig {
        self.config(n, n, n, confusion, seed)
    }
}

use ParamChoice::{P1, P2};

fn rows(table: &[&[ParamChoice]]) -> Vec<Vec<ParamChoice>> {
    table.iter().map(|r| r.to_vec()).collect()
}

/// The built-in experiment designs.
///
/// * `exp1`: 4 x (2+2); the continuous view only separates two merged pairs
///   of row clusters and the binary view the two complementary pairs, so only
///   the mixed fit can recover all four.
/// * `exp2-222 / exp2-333 / exp2-444`: square designs of growing cluster
///   counts.
/// * `sym-222 / sym-333 / sym-444`: symmetric designs whose marginal
///   parameters are equal per cluster, the known single-cluster trap.
pub fn builtin_layouts() -> Vec<LayoutTemplate> {
    vec![
        LayoutTemplate {
            name: "exp1",
            g: 4,
            m_c: 2,
            m_d: 2,
            continuous_layout: rows(&[&[P2, P1], &[P2, P2], &[P2, P1], &[P2, P2]]),
            binary_layout: rows(&[&[P2, P1], &[P2, P1], &[P2, P2], &[P2, P2]]),
        },
        LayoutTemplate {
            name: "exp2-222",
            g: 2,
            m_c: 2,
            m_d: 2,
            continuous_layout: rows(&[&[P1, P1], &[P1, P2]]),
            binary_layout: rows(&[&[P1, P1], &[P1, P2]]),
        },
        LayoutTemplate {
            name: "exp2-333",
            g: 3,
            m_c: 3,
            m_d: 3,
            continuous_layout: rows(&[&[P1, P2, P1], &[P1, P2, P2], &[P1, P1, P1]]),
            binary_layout: rows(&[&[P1, P2, P1], &[P1, P2, P2], &[P1, P1, P1]]),
        },
        LayoutTemplate {
            name: "exp2-444",
            g: 4,
            m_c: 4,
            m_d: 4,
            continuous_layout: rows(&[
                &[P2, P1, P2, P1],
                &[P2, P1, P2, P2],
                &[P2, P2, P2, P2],
                &[P2, P1, P1, P1],
            ]),
            binary_layout: rows(&[
                &[P2, P1, P2, P1],
                &[P2, P1, P2, P2],
                &[P2, P2, P2, P2],
                &[P2, P1, P1, P1],
            ]),
        },
        LayoutTemplate {
            name: "sym-222",
            g: 2,
            m_c: 2,
            m_d: 2,
            continuous_layout: rows(&[&[P1, P2], &[P2, P1]]),
            binary_layout: rows(&[&[P1, P2], &[P2, P1]]),
        },
        LayoutTemplate {
            name: "sym-333",
            g: 3,
            m_c: 3,
            m_d: 3,
            continuous_layout: rows(&[&[P1, P1, P2], &[P1, P2, P1], &[P2, P1, P1]]),
            binary_layout: rows(&[&[P1, P1, P2], &[P1, P2, P1], &[P2, P1, P1]]),
        },
        LayoutTemplate {
            name: "sym-444",
            g: 4,
            m_c: 4,
            m_d: 4,
            continuous_layout: rows(&[
                &[P1, P1, P1, P2],
                &[P1, P1, P2, P1],
                &[P1, P2, P1, P1],
                &[P2, P1, P1, P1],
            ]),
            binary_layout: rows(&[
                &[P1, P1, P1, P2],
                &[P1, P1, P2, P1],
                &[P1, P2, P1, P1],
                &[P2, P1, P1, P1],
            ]),
        },
    ]
}

/// Looks a template up by name.
pub fn layout_by_name(name: &str) -> Result<LayoutTemplate, GenError> {
    builtin_layouts()
        .into_iter()
        .find(|t| t.name == name)
        .ok_or_else(|| GenError::UnknownLayout(name.to_string()))
}
