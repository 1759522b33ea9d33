//! End-to-end tests of the `mlbm` binary: file contracts, determinism and
//! exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mlbm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlbm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_writes_the_three_files_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "generate", "--layout", "exp1", "--size", "20", "--confusion", "low", "--seed", "7",
        "-o", "a",
    ];
    assert_ok(&mlbm(tmp.path(), &args));
    for f in ["data.csv", "truth.csv", "config.json"] {
        assert!(tmp.path().join("a").join(f).exists(), "{f} missing");
    }
    // byte-identical rerun into another directory
    let mut args2 = args;
    args2[10] = "b";
    assert_ok(&mlbm(tmp.path(), &args2));
    for f in ["data.csv", "truth.csv", "config.json"] {
        let a = fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }
    // header shape: c_* then b_*
    let data = fs::read_to_string(tmp.path().join("a/data.csv")).unwrap();
    let header = data.lines().next().unwrap();
    assert!(header.starts_with("c_0,"));
    assert!(header.contains(",b_0,"));
    // config carries the layout tables
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/config.json")).unwrap())
            .unwrap();
    assert_eq!(cfg["schema_version"], 1);
    assert_eq!(cfg["layout"], "exp1");
    assert_eq!(cfg["g"], 4);
    assert_eq!(cfg["continuous_layout"][0][0], "p2");
}

#[test]
fn unknown_layout_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mlbm(
        tmp.path(),
        &["generate", "--layout", "nope", "--size", "10", "--confusion", "low", "-o", "x"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown layout"));
}

#[test]
fn trivial_fit_recovers_sample_moments() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp2-222", "--size", "16", "--confusion", "medium",
            "--seed", "3", "-o", "ds",
        ],
    ));
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "fit", "--data", "ds/data.csv", "--g", "1", "--mc", "1", "--md", "1", "--restarts",
            "1", "--seed", "5", "-o", "fit1",
        ],
    ));
    let params: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fit1/params.json")).unwrap())
            .unwrap();
    // recompute the sample moments from the data file
    let data = fs::read_to_string(tmp.path().join("ds/data.csv")).unwrap();
    let mut cont = Vec::new();
    let mut bin = Vec::new();
    let header: Vec<&str> = data.lines().next().unwrap().split(',').collect();
    for line in data.lines().skip(1) {
        for (name, field) in header.iter().zip(line.split(',')) {
            let v: f64 = field.parse().unwrap();
            if name.starts_with("c_") {
                cont.push(v);
            } else {
                bin.push(v);
            }
        }
    }
    let mean = cont.iter().sum::<f64>() / cont.len() as f64;
    let var = cont.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cont.len() as f64;
    let alpha = bin.iter().sum::<f64>() / bin.len() as f64;
    assert!((params["mu"][0][0].as_f64().unwrap() - mean).abs() < 1e-9);
    assert!((params["sigma2"][0][0].as_f64().unwrap() - var).abs() < 1e-9);
    assert!((params["alpha"][0][0].as_f64().unwrap() - alpha).abs() < 1e-9);
    assert_eq!(params["pi"][0], 1.0);
    assert_eq!(params["converged"], true);
}

#[test]
fn continuous_mode_ignores_binary_columns() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp2-222", "--size", "14", "--confusion", "low", "--seed",
            "9", "-o", "ds",
        ],
    ));
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "fit", "--data", "ds/data.csv", "--g", "2", "--mc", "2", "--md", "2", "--mode",
            "continuous", "--restarts", "2", "--seed", "1", "-o", "fitc",
        ],
    ));
    let params: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fitc/params.json")).unwrap())
            .unwrap();
    assert_eq!(params["mode"], "continuous");
    assert_eq!(params["m_d"], 0);
    assert_eq!(params["alpha"].as_array().map(|a| a.len()), Some(2));
    assert_eq!(params["alpha"][0].as_array().map(|a| a.len()), Some(0));
    // partition file has no binary-column labels
    let partition = fs::read_to_string(tmp.path().join("fitc/partition.csv")).unwrap();
    let second: Vec<&str> = partition.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(second[2], "", "bcol column should be empty in continuous mode");
}

#[test]
fn fit_trace_is_non_decreasing_after_warmup() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp1", "--size", "100", "--confusion", "low", "--seed",
            "4", "-o", "ds",
        ],
    ));
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "fit", "--data", "ds/data.csv", "--g", "4", "--mc", "2", "--md", "2", "--seed",
            "2", "-o", "fitd",
        ],
    ));
    let trace = fs::read_to_string(tmp.path().join("fitd/fc_trace.csv")).unwrap();
    let fc: Vec<f64> =
        trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(fc.len() >= 2);
    // default warm-up is 5 outer iterations
    for w in fc[4.min(fc.len() - 1)..].windows(2) {
        assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[1].abs()), "trace decreased: {w:?}");
    }
}

#[test]
fn eval_agrees_with_itself_and_detects_length_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp2-222", "--size", "12", "--confusion", "low", "--seed",
            "2", "-o", "ds",
        ],
    ));
    let out = mlbm(tmp.path(), &["eval", "ds/truth.csv", "ds/truth.csv"]);
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(json["ari"], 1.0);
    assert_eq!(json["row_ari"], 1.0);
    assert_eq!(json["ccol_ari"], 1.0);
    assert_eq!(json["bcol_ari"], 1.0);

    // a second dataset with a different row count
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp2-222", "--size", "10", "--confusion", "low", "--seed",
            "2", "-o", "ds2",
        ],
    ));
    let out = mlbm(tmp.path(), &["eval", "ds/truth.csv", "ds2/truth.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("length"));
}

#[test]
fn eval_matches_library_level_ari() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "generate", "--layout", "exp1", "--size", "30", "--confusion", "medium", "--seed",
            "21", "-o", "ds",
        ],
    ));
    assert_ok(&mlbm(
        tmp.path(),
        &[
            "fit", "--data", "ds/data.csv", "--g", "4", "--mc", "2", "--md", "2", "--restarts",
            "4", "--seed", "6", "-o", "fitm",
        ],
    ));
    let out = mlbm(tmp.path(), &["eval", "ds/truth.csv", "fitm/partition.csv"]);
    assert_ok(&out);
    let json: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();

    let read_labels = |path: &Path, col: usize| -> Vec<usize> {
        fs::read_to_string(path)
            .unwrap()
            .lines()
            .skip(1)
            .filter_map(|l| l.split(',').nth(col).filter(|f| !f.is_empty()).map(|f| f.parse().unwrap()))
            .collect()
    };
    let truth = read_labels(&tmp.path().join("ds/truth.csv"), 0);
    let fitted = read_labels(&tmp.path().join("fitm/partition.csv"), 0);
    let expected = mlbm_core::ari(&truth, &fitted).unwrap();
    assert!((json["ari"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn rectangular_plans_use_the_cols_list() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = r#"{
        "schema_version": 1,
        "layout": "exp2-222",
        "sizes": [20],
        "cols": [5, 10],
        "confusions": ["low"],
        "samples": 1,
        "modes": ["mixed"],
        "vem": { "restarts": 2 },
        "seed": 3
    }"#;
    fs::write(tmp.path().join("plan.json"), plan).unwrap();
    assert_ok(&mlbm(tmp.path(), &["experiment", "--plan", "plan.json", "-o", "rect"]));
    let results = fs::read_to_string(tmp.path().join("rect/results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(lines.len(), 1 + 2, "2 column widths x 1 confusion x 1 sample x 1 mode");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((fields[1], fields[2], fields[3]), ("20", "5", "5"));
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!((fields[1], fields[2], fields[3]), ("20", "10", "10"));
}

#[test]
fn experiment_grid_shape_and_determinism_modulo_wall_ms() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = r#"{
        "schema_version": 1,
        "layout": "exp1",
        "sizes": [25],
        "confusions": ["low", "medium", "high"],
        "samples": 1,
        "modes": ["continuous", "binary", "mixed"],
        "vem": { "restarts": 2 },
        "seed": 11
    }"#;
    fs::write(tmp.path().join("plan.json"), plan).unwrap();
    assert_ok(&mlbm(tmp.path(), &["experiment", "--plan", "plan.json", "-o", "run1"]));
    assert_ok(&mlbm(tmp.path(), &["experiment", "--plan", "plan.json", "-o", "run2"]));

    let results = fs::read_to_string(tmp.path().join("run1/results.csv")).unwrap();
    let lines: Vec<&str> = results.lines().collect();
    assert_eq!(
        lines[0],
        "layout,n,d_c,d_d,confusion,sample,mode,seed,row_ari,ccol_ari,bcol_ari,cross_row_ari,fc_final,outer_iters,wall_ms,status"
    );
    assert_eq!(lines.len(), 1 + 9, "1 size x 3 confusions x 1 sample x 3 modes");

    // identical reruns except the wall_ms column
    let strip_wall = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() >= 15 {
                    f[14] = "-";
                }
                f.join(",")
            })
            .collect()
    };
    let a = fs::read_to_string(tmp.path().join("run1/results.csv")).unwrap();
    let b = fs::read_to_string(tmp.path().join("run2/results.csv")).unwrap();
    assert_eq!(strip_wall(&a), strip_wall(&b));
    for f in ["summary.csv", "param_errors.csv", "violin_rows_low.svg", "violin_cross_high.svg"]
    {
        let a = fs::read(tmp.path().join("run1").join(f)).unwrap();
        let b = fs::read(tmp.path().join("run2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between reruns");
    }

    // every status is ok and the cross column is filled for complete cells
    for line in &lines[1..] {
        assert!(line.ends_with(",ok"), "unexpected status in: {line}");
        let cross = line.split(',').nth(11).unwrap();
        assert!(!cross.is_empty(), "cross_row_ari missing in: {line}");
    }
}

#[test]
fn violin_svg_matches_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = r#"{
        "schema_version": 1,
        "layout": "exp2-222",
        "sizes": [16],
        "confusions": ["low"],
        "samples": 3,
        "modes": ["mixed"],
        "vem": { "restarts": 2 },
        "seed": 5
    }"#;
    fs::write(tmp.path().join("plan.json"), plan).unwrap();
    assert_ok(&mlbm(tmp.path(), &["experiment", "--plan", "plan.json", "-o", "out"]));
    let rendered = fs::read_to_string(tmp.path().join("out/violin_rows_low.svg")).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/violin_rows_low.svg");
    let golden = fs::read_to_string(&golden_path).unwrap();
    assert_eq!(rendered, golden, "violin SVG diverged from the golden file");
}
