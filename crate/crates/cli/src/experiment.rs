//! Experiment grid runner: generates every dataset cell of a plan, fits the
//! requested analysis modes, and emits the results table, per-group
//! summaries, parameter-recovery errors and violin panels.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use mlbm_core::{
    ari, fit, generate, layout_by_name, match_clusters, restart_seed, summarize, ConfusionLevel,
    FitResult, LabeledDataset, LayoutTemplate, ModelSpec, ParamChoice, Summary,
};
use rayon::prelude::*;

use crate::io::PlanFile;
use crate::violin::{render_violin, ViolinGroup};

pub const MODE_ORDER: [&str; 3] = ["continuous", "binary", "mixed"];

/// One dataset cell of the plan grid.
#[derive(Clone)]
struct CellSpec {
    index: usize,
    n: usize,
    d_c: usize,
    d_d: usize,
    confusion: ConfusionLevel,
    sample: usize,
}

struct ModeOutcome {
    mode: &'static str,
    seed: u64,
    row_ari: Option<f64>,
    ccol_ari: Option<f64>,
    bcol_ari: Option<f64>,
    fc_final: Option<f64>,
    outer_iters: Option<usize>,
    wall_ms: u64,
    status: String,
    param_errors: Vec<ParamError>,
    fitted_row_labels: Option<Vec<usize>>,
}

struct CellOutcome {
    spec: CellSpec,
    modes: Vec<ModeOutcome>,
    cross_row_ari: Option<f64>,
}

pub struct ParamError {
    pub family: &'static str,
    pub row_cluster: usize,
    pub col_cluster: usize,
    pub true_value: f64,
    pub estimated: f64,
    pub discriminative: bool,
}

fn expand_cells(plan: &PlanFile) -> Result<Vec<CellSpec>> {
    let mut cells = Vec::new();
    let mut index = 0;
    for &n in &plan.sizes {
        let col_choices: Vec<usize> = match &plan.cols {
            Some(cols) => cols.clone(),
            None => vec![n],
        };
        for &cols in &col_choices {
            for conf in &plan.confusions {
                let confusion = ConfusionLevel::parse(conf).map_err(|e| anyhow::anyhow!("{e}"))?;
                for sample in 0..plan.samples {
                    cells.push(CellSpec { index, n, d_c: cols, d_d: cols, confusion, sample });
                    index += 1;
                }
            }
        }
    }
    Ok(cells)
}

fn mode_spec(mode: &str, layout: &LayoutTemplate) -> ModelSpec {
    match mode {
        "continuous" => ModelSpec::new(layout.g, layout.m_c, 0),
        "binary" => ModelSpec::new(layout.g, 0, layout.m_d),
        _ => ModelSpec::new(layout.g, layout.m_c, layout.m_d),
    }
}

fn fit_mode(
    ds: &LabeledDataset,
    layout: &LayoutTemplate,
    plan: &PlanFile,
    mode: &'static str,
    seed: u64,
) -> ModeOutcome {
    let data = match mode {
        "continuous" => ds.data.continuous_only(),
        "binary" => ds.data.binary_only(),
        _ => ds.data.clone(),
    };
    let cfg = plan.vem.to_config(seed);
    let started = Instant::now();
    let fitted = fit(&data, mode_spec(mode, layout), &cfg);
    let wall_ms = started.elapsed().as_millis() as u64;
    match fitted {
        Ok(result) => {
            let row_ari = ari(&ds.truth.row_labels, &result.partition.row_labels).ok();
            let ccol_ari = (mode != "binary")
                .then(|| ari(&ds.truth.ccol_labels, &result.partition.ccol_labels).ok())
                .flatten();
            let bcol_ari = (mode != "continuous")
                .then(|| ari(&ds.truth.bcol_labels, &result.partition.bcol_labels).ok())
                .flatten();
            let param_errors = parameter_errors(ds, &result, mode);
            ModeOutcome {
                mode,
                seed,
                row_ari,
                ccol_ari,
                bcol_ari,
                fc_final: Some(result.final_fc()),
                outer_iters: Some(result.outer_iters),
                wall_ms,
                status: "ok".into(),
                param_errors,
                fitted_row_labels: Some(result.partition.row_labels),
            }
        }
        Err(e) => ModeOutcome {
            mode,
            seed,
            row_ari: None,
            ccol_ari: None,
            bcol_ari: None,
            fc_final: None,
            outer_iters: None,
            wall_ms,
            status: e.to_string().replace([',', '\n'], ";"),
            param_errors: Vec::new(),
            fitted_row_labels: None,
        },
    }
}

/// |theta_hat - theta| per block after aligning fitted clusters to true
/// clusters by membership overlap.
fn parameter_errors(ds: &LabeledDataset, result: &FitResult, mode: &str) -> Vec<ParamError> {
    let p = ds.config.confusion.params();
    let g = ds.config.g();
    if g > 8 {
        return Vec::new();
    }
    let row_perm = match_clusters(&ds.truth.row_labels, &result.partition.row_labels, g);
    let mut out = Vec::new();
    let varies = |table: &Vec<Vec<ParamChoice>>, l: usize| {
        table.iter().any(|row| row[l] != table[0][l])
    };
    if mode != "binary" {
        let perm =
            match_clusters(&ds.truth.ccol_labels, &result.partition.ccol_labels, ds.config.m_c());
        for k in 0..g {
            for l in 0..ds.config.m_c() {
                let truth = match ds.config.continuous_layout[k][l] {
                    ParamChoice::P1 => p.mu1,
                    ParamChoice::P2 => p.mu2,
                };
                out.push(ParamError {
                    family: "gaussian_mu",
                    row_cluster: k,
                    col_cluster: l,
                    true_value: truth,
                    estimated: result.params.mu[[row_perm[k], perm[l]]],
                    discriminative: varies(&ds.config.continuous_layout, l),
                });
            }
        }
    }
    if mode != "continuous" {
        let perm =
            match_clusters(&ds.truth.bcol_labels, &result.partition.bcol_labels, ds.config.m_d());
        for k in 0..g {
            for l in 0..ds.config.m_d() {
                let truth = match ds.config.binary_layout[k][l] {
                    ParamChoice::P1 => p.alpha1,
                    ParamChoice::P2 => p.alpha2,
                };
                out.push(ParamError {
                    family: "bernoulli_alpha",
                    row_cluster: k,
                    col_cluster: l,
                    true_value: truth,
                    estimated: result.params.alpha[[row_perm[k], perm[l]]],
                    discriminative: varies(&ds.config.binary_layout, l),
                });
            }
        }
    }
    out
}

fn run_cell(plan: &PlanFile, layout: &LayoutTemplate, spec: CellSpec) -> Result<CellOutcome> {
    let data_seed = restart_seed(plan.seed, spec.index * 4);
    let cfg = layout.config(spec.n, spec.d_c, spec.d_d, spec.confusion, data_seed);
    let ds = generate(&cfg).map_err(|e| anyhow::anyhow!("{e}"))?;

    let mut modes = Vec::new();
    for (mi, &mode) in MODE_ORDER.iter().enumerate() {
        if !plan.modes.iter().any(|m| m == mode) {
            continue;
        }
        let seed = restart_seed(plan.seed, spec.index * 4 + 1 + mi);
        modes.push(fit_mode(&ds, layout, plan, mode, seed));
    }

    // cross-partition agreement between the two uni-type row partitions
    let labels = |mode: &str| {
        modes.iter().find(|m| m.mode == mode).and_then(|m| m.fitted_row_labels.as_deref())
    };
    let cross_row_ari = match (labels("continuous"), labels("binary")) {
        (Some(a), Some(b)) => ari(a, b).ok(),
        _ => None,
    };

    Ok(CellOutcome { spec, modes, cross_row_ari })
}

pub fn run(plan: &PlanFile, out_dir: &Path) -> Result<()> {
    let layout = layout_by_name(&plan.layout).map_err(|e| anyhow::anyhow!("{e}"))?;
    let cells = expand_cells(plan)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let outcomes: Vec<Result<CellOutcome>> = cells
        .par_iter()
        .map(|spec| run_cell(plan, &layout, spec.clone()))
        .collect();
    let mut ordered = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        ordered.push(o?);
    }

    write_results_csv(&out_dir.join("results.csv"), plan, &ordered)?;
    write_param_errors_csv(&out_dir.join("param_errors.csv"), plan, &ordered)?;
    write_summary_csv(&out_dir.join("summary.csv"), plan, &ordered)?;
    write_violins(out_dir, plan, &ordered)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

fn write_results_csv(path: &Path, plan: &PlanFile, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "layout", "n", "d_c", "d_d", "confusion", "sample", "mode", "seed", "row_ari",
        "ccol_ari", "bcol_ari", "cross_row_ari", "fc_final", "outer_iters", "wall_ms", "status",
    ])?;
    for cell in outcomes {
        for m in &cell.modes {
            w.write_record([
                plan.layout.clone(),
                cell.spec.n.to_string(),
                cell.spec.d_c.to_string(),
                cell.spec.d_d.to_string(),
                cell.spec.confusion.name().to_string(),
                cell.spec.sample.to_string(),
                m.mode.to_string(),
                m.seed.to_string(),
                opt(m.row_ari),
                opt(m.ccol_ari),
                opt(m.bcol_ari),
                opt(cell.cross_row_ari),
                opt(m.fc_final),
                m.outer_iters.map_or(String::new(), |v| v.to_string()),
                m.wall_ms.to_string(),
                m.status.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_param_errors_csv(path: &Path, plan: &PlanFile, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "layout", "n", "confusion", "sample", "mode", "family", "row_cluster", "col_cluster",
        "true_value", "estimated", "abs_error", "discriminative",
    ])?;
    for cell in outcomes {
        for m in &cell.modes {
            for e in &m.param_errors {
                w.write_record([
                    plan.layout.clone(),
                    cell.spec.n.to_string(),
                    cell.spec.confusion.name().to_string(),
                    cell.spec.sample.to_string(),
                    m.mode.to_string(),
                    e.family.to_string(),
                    e.row_cluster.to_string(),
                    e.col_cluster.to_string(),
                    e.true_value.to_string(),
                    e.estimated.to_string(),
                    (e.estimated - e.true_value).abs().to_string(),
                    e.discriminative.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Samples of one metric within a (n, d_c, confusion, mode) group, in plan
/// order.
fn collect_metric(
    outcomes: &[CellOutcome],
    n: usize,
    d_c: usize,
    confusion: ConfusionLevel,
    mode: &str,
    metric: &str,
) -> Vec<f64> {
    let mut values = Vec::new();
    for cell in outcomes {
        if cell.spec.n != n || cell.spec.d_c != d_c || cell.spec.confusion != confusion {
            continue;
        }
        for m in &cell.modes {
            if m.mode != mode {
                continue;
            }
            let v = match metric {
                "row_ari" => m.row_ari,
                "ccol_ari" => m.ccol_ari,
                "bcol_ari" => m.bcol_ari,
                "col_ari_weighted" => match (m.ccol_ari, m.bcol_ari) {
                    (Some(c), Some(b)) => {
                        let (dc, dd) = (cell.spec.d_c as f64, cell.spec.d_d as f64);
                        Some((dc * c + dd * b) / (dc + dd))
                    }
                    _ => None,
                },
                _ => None,
            };
            if let Some(v) = v {
                values.push(v);
            }
        }
    }
    values
}

fn group_keys(plan: &PlanFile) -> Vec<(usize, usize, ConfusionLevel)> {
    let mut keys = Vec::new();
    for &n in &plan.sizes {
        let col_choices: Vec<usize> = match &plan.cols {
            Some(cols) => cols.clone(),
            None => vec![n],
        };
        for &cols in &col_choices {
            for conf in &plan.confusions {
                keys.push((n, cols, ConfusionLevel::parse(conf).expect("validated")));
            }
        }
    }
    keys
}

fn write_summary_csv(path: &Path, plan: &PlanFile, outcomes: &[CellOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "layout", "n", "d_c", "d_d", "confusion", "mode", "metric", "count", "mean", "median",
        "sd", "min", "max",
    ])?;
    let mut emit = |n: usize,
                    d_c: usize,
                    confusion: ConfusionLevel,
                    mode: &str,
                    metric: &str,
                    values: &[f64]|
     -> Result<()> {
        if values.is_empty() {
            return Ok(());
        }
        let s: Summary = summarize(values).map_err(|e| anyhow::anyhow!("{e}"))?;
        w.write_record([
            plan.layout.clone(),
            n.to_string(),
            d_c.to_string(),
            d_c.to_string(),
            confusion.name().to_string(),
            mode.to_string(),
            metric.to_string(),
            s.count.to_string(),
            s.mean.to_string(),
            s.median.to_string(),
            s.sd.to_string(),
            s.min.to_string(),
            s.max.to_string(),
        ])?;
        Ok(())
    };

    for (n, d_c, confusion) in group_keys(plan) {
        for mode in MODE_ORDER {
            if !plan.modes.iter().any(|m| m == mode) {
                continue;
            }
            for metric in ["row_ari", "ccol_ari", "bcol_ari", "col_ari_weighted"] {
                let values = collect_metric(outcomes, n, d_c, confusion, mode, metric);
                emit(n, d_c, confusion, mode, metric, &values)?;
            }
        }
        let cross: Vec<f64> = outcomes
            .iter()
            .filter(|c| c.spec.n == n && c.spec.d_c == d_c && c.spec.confusion == confusion)
            .filter_map(|c| c.cross_row_ari)
            .collect();
        emit(n, d_c, confusion, "cross", "cross_row_ari", &cross)?;
    }
    w.flush()?;
    Ok(())
}

fn write_violins(out_dir: &Path, plan: &PlanFile, outcomes: &[CellOutcome]) -> Result<()> {
    for conf in &plan.confusions {
        let confusion = ConfusionLevel::parse(conf).expect("validated");
        let keys: Vec<(usize, usize)> = group_keys(plan)
            .into_iter()
            .filter(|(_, _, c)| *c == confusion)
            .map(|(n, d, _)| (n, d))
            .collect();

        // row-partition quality per size and mode
        let mut groups = Vec::new();
        for &(n, d_c) in &keys {
            for mode in MODE_ORDER {
                if !plan.modes.iter().any(|m| m == mode) {
                    continue;
                }
                let values = collect_metric(outcomes, n, d_c, confusion, mode, "row_ari");
                if let Ok(summary) = summarize(&values) {
                    groups.push(ViolinGroup { label: format!("{n}/{mode}"), summary });
                }
            }
        }
        if !groups.is_empty() {
            let svg = render_violin(
                &format!("Row ARI ({} confusion)", confusion.name()),
                "adjusted Rand index",
                &groups,
            );
            fs::write(out_dir.join(format!("violin_rows_{}.svg", confusion.name())), svg)?;
        }

        // column-partition quality of the mixed fits
        if plan.modes.iter().any(|m| m == "mixed") {
            let mut groups = Vec::new();
            for &(n, d_c) in &keys {
                for metric in ["ccol_ari", "bcol_ari", "col_ari_weighted"] {
                    let values = collect_metric(outcomes, n, d_c, confusion, "mixed", metric);
                    if let Ok(summary) = summarize(&values) {
                        let short = match metric {
                            "ccol_ari" => "cont",
                            "bcol_ari" => "bin",
                            _ => "wtd",
                        };
                        groups.push(ViolinGroup { label: format!("{n}/{short}"), summary });
                    }
                }
            }
            if !groups.is_empty() {
                let svg = render_violin(
                    &format!("Column ARI, mixed fit ({} confusion)", confusion.name()),
                    "adjusted Rand index",
                    &groups,
                );
                fs::write(out_dir.join(format!("violin_cols_{}.svg", confusion.name())), svg)?;
            }
        }

        // continuous-vs-binary row-partition agreement
        let mut groups = Vec::new();
        for &(n, d_c) in &keys {
            let values: Vec<f64> = outcomes
                .iter()
                .filter(|c| c.spec.n == n && c.spec.d_c == d_c && c.spec.confusion == confusion)
                .filter_map(|c| c.cross_row_ari)
                .collect();
            if let Ok(summary) = summarize(&values) {
                groups.push(ViolinGroup { label: format!("{n}"), summary });
            }
        }
        if !groups.is_empty() {
            let svg = render_violin(
                &format!("Continuous vs binary row partitions ({} confusion)", confusion.name()),
                "cross ARI",
                &groups,
            );
            fs::write(out_dir.join(format!("violin_cross_{}.svg", confusion.name())), svg)?;
        }
    }
    Ok(())
}
