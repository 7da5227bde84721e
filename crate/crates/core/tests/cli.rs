use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rkmor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkmor")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const LIN: &str = "0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";

#[test]
fn help_lists_flags() {
    let o = rkmor(&["reduce", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in ["--system-a", "--system-b", "--system-c", "--tableau-c", "--tableau-o", "--steps-c", "--steps-o", "--schedule", "--truncation", "--tol", "--out", "--seed", "--realify"] {
        assert!(text.contains(flag), "missing {flag}");
    }
    assert!(stdout(&rkmor(&["--help"])).contains("RUST_LOG"));
}

#[test]
fn expansion_points_single_sides() {
    let o = rkmor(&["expansion-points", "--tableau-c", "gauss-legendre-2", "--steps-c", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let im: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!((rows[0][1].parse::<f64>().unwrap() - 3.0).abs() < 1e-12);
    assert!((im[0] + 3f64.sqrt()).abs() < 1e-12 && (im[1] - 3f64.sqrt()).abs() < 1e-12);

    let o = rkmor(&["expansion-points", "--tableau-o", "radau-ia-2", "--steps-o", "0.5"]);
    let rows = csv_rows(&stdout(&o));
    assert!(rows.iter().all(|r| r[0] == "output" && (r[1].parse::<f64>().unwrap() - 4.0).abs() < 1e-12));
    assert!((rows[1][2].parse::<f64>().unwrap() - 8f64.sqrt()).abs() < 1e-12);
}

#[test]
fn expansion_points_counts_and_infinity() {
    let o = rkmor(&["expansion-points", "--tableau-c", "gl2", "--steps-c", LIN, "--tableau-o", "radau2", "--steps-o", LIN]);
    assert_eq!(csv_rows(&stdout(&o)).len(), 32);
    // coinciding points merge
    let o = rkmor(&["expansion-points", "--tableau-c", "backward-euler", "--steps-c", "0.5,0.5,1"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().any(|r| r[1] == "2" && r[3] == "2"));
    let o = rkmor(&["expansion-points", "--tableau-c", "explicit-euler", "--steps-c", "0.1,0.2"]);
    assert_eq!(csv_rows(&stdout(&o)), vec![vec!["input", "inf", "0", "2"]]);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(rkmor(&["expansion-points", "--tableau-c", "rk4", "--steps-c", "1"]).status.code(), Some(2));
    assert_eq!(rkmor(&["expansion-points", "--tableau-c", "gl2", "--steps-c", "1,-2"]).status.code(), Some(2));
    assert_eq!(rkmor(&["reduce", "--bundled", "nope-3"]).status.code(), Some(2));
    assert_eq!(rkmor(&["reduce", "--bundled", "diagonal-20", "--truncation", "half"]).status.code(), Some(2));
    assert_eq!(rkmor(&["reduce"]).status.code(), Some(2));
    assert_eq!(rkmor(&["frobnicate"]).status.code(), Some(2));
    let o = rkmor(&["reduce", "--system-a", "/no/such/a.mtx", "--system-b", "/no/b.mtx", "--system-c", "/no/c.mtx"]);
    assert_eq!(o.status.code(), Some(2));
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

#[test]
fn unstable_system_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("a.mtx"), "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 -2.0\n");
    write(&d.join("b.mtx"), "%%MatrixMarket matrix array real general\n2 1\n1\n1\n");
    write(&d.join("c.mtx"), "%%MatrixMarket matrix array real general\n1 2\n1\n1\n");
    let p = |f: &str| d.join(f).to_string_lossy().into_owned();
    let o = rkmor(&["reduce", "--system-a", &p("a.mtx"), "--system-b", &p("b.mtx"), "--system-c", &p("c.mtx"), "--steps-c", "1", "--steps-o", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("system not stable"), "{}", stderr(&o));
}

#[test]
fn verify_passes_on_diffusion() {
    let o = rkmor(&[
        "verify", "--bundled", "diffusion-100", "--tableau-c", "backward-euler", "--tableau-o", "backward-euler",
        "--steps-c", "0.01,0.03,0.1,0.3", "--steps-o", "0.02,0.05,0.2,0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn verify_rank_deficient_exits_3_and_threshold_is_labelled() {
    let common = ["verify", "--bundled", "diffusion-100", "--tableau-c", "gl2", "--tableau-o", "radau2", "--steps-c", LIN, "--steps-o", LIN];
    assert_eq!(rkmor(&common).status.code(), Some(3));
    let mut args = common.to_vec();
    args.extend(["--truncation", "threshold:1e-4"]);
    let o = rkmor(&args);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    assert!(stdout(&o).contains("outside interpolation guarantees"));
}

#[test]
fn reduce_writes_metadata_with_32_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_s = out.to_string_lossy().into_owned();
    let args = [
        "reduce", "--bundled", "diffusion-100", "--tableau-c", "gauss-legendre-2", "--tableau-o", "radau-ia-2", "--steps-c", LIN,
        "--steps-o", LIN, "--truncation", "threshold:1e-10", "--realify", "--dump-factors", "--out", &out_s,
    ];
    let o = rkmor(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["finite_expansion_points"], 32);
    assert_eq!(meta["expansion_points"]["points"].as_array().unwrap().len(), 32);
    assert_eq!(meta["realified"], true);
    assert_eq!(meta["guarantee"]["status"], "outside_guarantees");
    assert!(out.join("reduced_a.mtx").exists() && out.join("factors/z_c_008.mtx").exists());

    // deterministic artifacts
    let first = fs::read(out.join("metadata.json")).unwrap();
    let first_csv = fs::read(out.join("expansion_points.csv")).unwrap();
    assert_eq!(rkmor(&args).status.code(), Some(0));
    assert_eq!(fs::read(out.join("metadata.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("expansion_points.csv")).unwrap(), first_csv);
}

#[test]
fn reduce_reads_matrix_market_and_tableau_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("a.mtx"), "%%MatrixMarket matrix array real general\n3 3\n-1\n0.5\n0\n0\n-2\n0.3\n0\n0\n-3\n");
    write(&d.join("b.mtx"), "%%MatrixMarket matrix array real general\n3 1\n1\n0.5\n1\n");
    write(&d.join("c.mtx"), "%%MatrixMarket matrix array real general\n1 3\n1\n-1\n2\n");
    write(&d.join("be.json"), r#"{"s":1,"lambda":[[{"re":1.0,"im":0.0}]],"beta":[{"re":1.0,"im":0.0}],"beta_tilde":[1.0],"gamma":[1.0]}"#);
    let p = |f: &str| d.join(f).to_string_lossy().into_owned();
    let o = rkmor(&[
        "verify", "--system-a", &p("a.mtx"), "--system-b", &p("b.mtx"), "--system-c", &p("c.mtx"), "--tableau-c", &p("be.json"),
        "--tableau-o", "backward-euler", "--steps-c", "0.5", "--steps-o", "0.25", "--out", &p("out"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("out/interpolation_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["entries"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_adi_cases() {
    assert_eq!(rkmor(&["compare-adi", "--bundled", "diagonal-20", "--alphas", "-1"]).status.code(), Some(0));
    assert_eq!(rkmor(&["compare-adi", "--bundled", "diagonal-20", "--alphas", "1"]).status.code(), Some(2));
    let o = rkmor(&["compare-adi", "--bundled", "diagonal-20", "--alphas", "-1,-2+1i,-2-1i", "--gramian", "observability"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn default_schedule_runs() {
    let o = rkmor(&["reduce", "--bundled", "diagonal-20", "--tableau-c", "implicit-midpoint", "--tableau-o", "implicit-midpoint", "--truncation", "order:4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("r = 4 (20 + 20 factor columns)"));
}
