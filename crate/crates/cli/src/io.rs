//! File formats: the data/truth CSVs written by `generate`, the fit output
//! files, and the JSON config / plan schemas. Continuous columns are
//! prefixed `c_`, binary columns `b_`; label files carry three columns of
//! possibly different lengths (`row`, `ccol`, `bcol`), padded with empty
//! cells.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mlbm_core::{
    ConfusionLevel, FitResult, GenConfig, HardPartition, LabeledDataset, MixedDataMatrix,
    ModelParams, ParamChoice, SoftMemberships,
};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

// ------------------------------------------------------------------ data CSV

pub fn write_data_csv(path: &Path, x: &MixedDataMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let header: Vec<String> = (0..x.d_c())
        .map(|j| format!("c_{j}"))
        .chain((0..x.d_d()).map(|j| format!("b_{j}")))
        .collect();
    w.write_record(&header)?;
    for i in 0..x.n() {
        let mut rec: Vec<String> = Vec::with_capacity(x.d_c() + x.d_d());
        for j in 0..x.d_c() {
            rec.push(x.continuous()[[i, j]].to_string());
        }
        for j in 0..x.d_d() {
            rec.push((x.binary()[[i, j]] as i64).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_data_csv(path: &Path) -> Result<MixedDataMatrix> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let mut c_cols = Vec::new();
    let mut b_cols = Vec::new();
    for (idx, name) in header.iter().enumerate() {
        if name.starts_with("c_") {
            c_cols.push(idx);
        } else if name.starts_with("b_") {
            b_cols.push(idx);
        } else {
            bail!("column '{name}' is neither c_* nor b_*");
        }
    }
    let mut cont_rows: Vec<f64> = Vec::new();
    let mut bin_rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for rec in r.records() {
        let rec = rec?;
        for &idx in &c_cols {
            cont_rows.push(rec[idx].parse::<f64>().with_context(|| {
                format!("row {n}: bad continuous value '{}'", &rec[idx])
            })?);
        }
        for &idx in &b_cols {
            bin_rows.push(rec[idx].parse::<f64>().with_context(|| {
                format!("row {n}: bad binary value '{}'", &rec[idx])
            })?);
        }
        n += 1;
    }
    let continuous = Array2::from_shape_vec((n, c_cols.len()), cont_rows)?;
    let binary = Array2::from_shape_vec((n, b_cols.len()), bin_rows)?;
    MixedDataMatrix::new(continuous, binary).map_err(|e| anyhow::anyhow!("{e}"))
}

// ----------------------------------------------------------------- label CSV

pub fn write_labels_csv(path: &Path, p: &HardPartition) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["row", "ccol", "bcol"])?;
    let rows = p.row_labels.len().max(p.ccol_labels.len()).max(p.bcol_labels.len());
    let cell = |v: &Vec<usize>, i: usize| v.get(i).map_or(String::new(), usize::to_string);
    for i in 0..rows {
        w.write_record([
            cell(&p.row_labels, i),
            cell(&p.ccol_labels, i),
            cell(&p.bcol_labels, i),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<HardPartition> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let col_of = |name: &str| header.iter().position(|h| h == name);
    let (ri, ci, bi) = (col_of("row"), col_of("ccol"), col_of("bcol"));
    if ri.is_none() && ci.is_none() && bi.is_none() {
        bail!("{}: no row/ccol/bcol column in header", path.display());
    }
    let mut p = HardPartition {
        row_labels: Vec::new(),
        ccol_labels: Vec::new(),
        bcol_labels: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        let push = |idx: Option<usize>, out: &mut Vec<usize>| -> Result<()> {
            if let Some(i) = idx {
                if let Some(field) = rec.get(i) {
                    if !field.is_empty() {
                        out.push(field.parse::<usize>().with_context(|| {
                            format!("bad label '{field}' in {}", path.display())
                        })?);
                    }
                }
            }
            Ok(())
        };
        push(ri, &mut p.row_labels)?;
        push(ci, &mut p.ccol_labels)?;
        push(bi, &mut p.bcol_labels)?;
    }
    Ok(p)
}

// ----------------------------------------------------------------- gen config

#[derive(Serialize, Deserialize)]
pub struct GenConfigFile {
    pub schema_version: u32,
    pub layout: Option<String>,
    pub n: usize,
    pub d_c: usize,
    pub d_d: usize,
    pub confusion: String,
    pub seed: u64,
    pub g: usize,
    pub m_c: usize,
    pub m_d: usize,
    pub row_proportions: Vec<f64>,
    pub ccol_proportions: Vec<f64>,
    pub bcol_proportions: Vec<f64>,
    pub continuous_layout: Vec<Vec<String>>,
    pub binary_layout: Vec<Vec<String>>,
}

fn choices_to_strings(rows: &[Vec<ParamChoice>]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    ParamChoice::P1 => "p1".to_string(),
                    ParamChoice::P2 => "p2".to_string(),
                })
                .collect()
        })
        .collect()
}

pub fn write_gen_config(path: &Path, cfg: &GenConfig, layout_name: Option<&str>) -> Result<()> {
    let file = GenConfigFile {
        schema_version: SCHEMA_VERSION,
        layout: layout_name.map(str::to_string),
        n: cfg.n,
        d_c: cfg.d_c,
        d_d: cfg.d_d,
        confusion: cfg.confusion.name().to_string(),
        seed: cfg.seed,
        g: cfg.g(),
        m_c: cfg.m_c(),
        m_d: cfg.m_d(),
        row_proportions: cfg.row_proportions.clone(),
        ccol_proportions: cfg.ccol_proportions.clone(),
        bcol_proportions: cfg.bcol_proportions.clone(),
        continuous_layout: choices_to_strings(&cfg.continuous_layout),
        binary_layout: choices_to_strings(&cfg.binary_layout),
    };
    fs::write(path, serde_json::to_string_pretty(&file)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_dataset(dir: &Path, ds: &LabeledDataset, layout_name: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_data_csv(&dir.join("data.csv"), &ds.data)?;
    write_labels_csv(&dir.join("truth.csv"), &ds.truth)?;
    write_gen_config(&dir.join("config.json"), &ds.config, layout_name)?;
    Ok(())
}

// ---------------------------------------------------------------- fit output

#[derive(Serialize, Deserialize)]
pub struct ParamsFile {
    pub schema_version: u32,
    pub mode: String,
    pub g: usize,
    pub m_c: usize,
    pub m_d: usize,
    pub pi: Vec<f64>,
    pub rho_c: Vec<f64>,
    pub rho_d: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma2: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub fc_final: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub seed: u64,
}

fn matrix_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn params_file(params: &ModelParams, result: &FitResult, mode: &str) -> ParamsFile {
    ParamsFile {
        schema_version: SCHEMA_VERSION,
        mode: mode.to_string(),
        g: params.g(),
        m_c: params.m_c(),
        m_d: params.m_d(),
        pi: params.pi.clone(),
        rho_c: params.rho_c.clone(),
        rho_d: params.rho_d.clone(),
        mu: matrix_rows(&params.mu),
        sigma2: matrix_rows(&params.sigma2),
        alpha: matrix_rows(&params.alpha),
        fc_final: result.final_fc(),
        outer_iters: result.outer_iters,
        converged: result.converged,
        seed: result.seed,
    }
}

pub fn write_memberships_csv(path: &Path, m: &SoftMemberships) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["kind", "index", "cluster", "weight"])?;
    for (kind, matrix) in [("row", &m.s), ("ccol", &m.tc), ("bcol", &m.td)] {
        for (i, row) in matrix.rows().into_iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                w.write_record([kind, &i.to_string(), &k.to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_fc_trace_csv(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["outer_iter", "fc"])?;
    for (i, fc) in trace.iter().enumerate() {
        w.write_record([i.to_string(), fc.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fit_outputs(dir: &Path, result: &FitResult, mode: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let params = params_file(&result.params, result, mode);
    fs::write(dir.join("params.json"), serde_json::to_string_pretty(&params)? + "\n")?;
    write_memberships_csv(&dir.join("memberships.csv"), &result.memberships)?;
    write_labels_csv(&dir.join("partition.csv"), &result.partition)?;
    write_fc_trace_csv(&dir.join("fc_trace.csv"), &result.fc_trace)?;
    Ok(())
}

// -------------------------------------------------------------- plan parsing

#[derive(Serialize, Deserialize, Clone)]
pub struct VemConfigFile {
    #[serde(default = "d_restarts")]
    pub restarts: usize,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_inner_max_iter")]
    pub inner_max_iter: usize,
    #[serde(default = "d_eps_inner")]
    pub eps_inner: f64,
    #[serde(default = "d_eps_outer")]
    pub eps_outer: f64,
    #[serde(default = "d_min_outer")]
    pub min_outer: usize,
    #[serde(default = "d_warmup_steps")]
    pub warmup_steps: usize,
    #[serde(default = "d_warmup_damping")]
    pub warmup_damping: f64,
}

fn d_restarts() -> usize {
    10
}
fn d_max_iter() -> usize {
    100
}
fn d_inner_max_iter() -> usize {
    10
}
fn d_eps_inner() -> f64 {
    1e-5
}
fn d_eps_outer() -> f64 {
    1e-10
}
fn d_min_outer() -> usize {
    10
}
fn d_warmup_steps() -> usize {
    5
}
fn d_warmup_damping() -> f64 {
    0.3
}

impl Default for VemConfigFile {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl VemConfigFile {
    pub fn to_config(&self, seed: u64) -> mlbm_core::VemConfig {
        mlbm_core::VemConfig {
            max_outer: self.max_iter,
            max_inner: self.inner_max_iter,
            eps_inner: self.eps_inner,
            eps_outer: self.eps_outer,
            min_outer: self.min_outer,
            warmup_steps: self.warmup_steps,
            warmup_damping: self.warmup_damping,
            n_restarts: self.restarts,
            seed,
        }
    }
}

/// Experiment plan: the grid of dataset configurations and analysis modes.
#[derive(Serialize, Deserialize, Clone)]
pub struct PlanFile {
    #[serde(default = "schema_one")]
    pub schema_version: u32,
    pub layout: String,
    pub sizes: Vec<usize>,
    /// Column counts per family; omitted means square (as many columns of
    /// each family as rows).
    #[serde(default)]
    pub cols: Option<Vec<usize>>,
    pub confusions: Vec<String>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_modes")]
    pub modes: Vec<String>,
    #[serde(default)]
    pub vem: VemConfigFile,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn schema_one() -> u32 {
    1
}
fn d_samples() -> usize {
    3
}
fn d_modes() -> Vec<String> {
    vec!["continuous".into(), "binary".into(), "mixed".into()]
}

pub fn read_plan(path: &Path) -> Result<PlanFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let plan: PlanFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    if plan.schema_version != SCHEMA_VERSION {
        bail!("plan schema version {} unsupported", plan.schema_version);
    }
    if plan.sizes.is_empty() || plan.confusions.is_empty() || plan.modes.is_empty() {
        bail!("plan needs non-empty sizes, confusions and modes");
    }
    if plan.samples < 1 {
        bail!("plan needs samples >= 1");
    }
    for c in &plan.confusions {
        ConfusionLevel::parse(c).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    for m in &plan.modes {
        if !matches!(m.as_str(), "continuous" | "binary" | "mixed") {
            bail!("unknown analysis mode '{m}'");
        }
    }
    Ok(plan)
}
