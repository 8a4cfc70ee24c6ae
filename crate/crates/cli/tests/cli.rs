use serde_json::Value;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccrflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("UTF-8 output")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Single mode `[[1/2, i mu], [-i mu, 1/2]]`.
fn mode_json(mu: f64) -> String {
    format!(r#"{{"dim": 2, "re": [[0.5, 0.0], [0.0, 0.5]], "im": [[0.0, {mu}], [{}, 0.0]]}}"#, -mu)
}

fn matrix_of(v: &Value) -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let grid = |x: &Value| -> Vec<Vec<f64>> {
        x.as_array().unwrap().iter().map(|row| row.as_array().unwrap().iter().map(|e| e.as_f64().unwrap()).collect()).collect()
    };
    (grid(&v["re"]), v.get("im").filter(|x| !x.is_null()).map(grid))
}

#[test]
fn flow_at_one_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "s.json",
        r#"{"dim": 3, "re": [[1.0, 0.2, 0.0], [0.2, 0.8, 0.1], [0.0, 0.1, 0.6]], "im": [[0.0, 0.3, 0.05], [-0.3, 0.0, 0.1], [-0.05, -0.1, 0.0]]}"#,
    );
    let out = run(&["flow", "--r", "1", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let (re, im) = matrix_of(&v["form"]);
    let im = im.unwrap();
    let re0 = [[1.0, 0.2, 0.0], [0.2, 0.8, 0.1], [0.0, 0.1, 0.6]];
    let im0 = [[0.0, 0.3, 0.05], [-0.3, 0.0, 0.1], [-0.05, -0.1, 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert!((re[i][j] - re0[i][j]).abs() < 1e-12);
            assert!((im[i][j] - im0[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn trajectory_csv_decreases_to_the_freeze_limit() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mu03.json", &mode_json(0.3));
    let out = run(&["trajectory", "--r-grid", "1,2,4,8,16,32,64,128,256,512,1024", "--input", input.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["r", "lambda_min", "lambda_max", "dist_to_limit", "extremality_residual"]);
    let rows: Vec<Vec<f64>> = reader.records().map(|r| r.unwrap().iter().map(|x| x.parse::<f64>().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    let dist: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    assert!(dist.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0)), "{dist:?}");
    assert!(*dist.last().unwrap() < 1e-6);
    // r = 1 leaves S alone: the distance is |S - S_inf|_F with S_inf = [[mu, i mu], [-i mu, mu]]
    let expected = 2.0_f64.sqrt() * (0.5 - 0.3);
    assert!((dist[0] - expected).abs() < 1e-14);
}

#[test]
fn csv_columns_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mu.json", &mode_json(0.17));
    let out = run(&["trajectory", "--input", input.to_str().unwrap(), "--format", "csv"]);
    let text = stdout(&out);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rewritten = csv::Writer::from_writer(Vec::new());
    rewritten.write_record(reader.headers().unwrap()).unwrap();
    for record in reader.records() {
        let record = record.unwrap();
        let values: Vec<f64> = record.iter().map(|x| x.parse().unwrap()).collect();
        // every printed value parses back to the same double
        for (field, value) in record.iter().zip(&values) {
            assert_eq!(field.parse::<f64>().unwrap().to_bits(), value.to_bits());
        }
        rewritten.write_record(values.iter().map(|x| format!("{x:.16e}"))).unwrap();
    }
    assert_eq!(String::from_utf8(rewritten.into_inner().unwrap()).unwrap(), text);
}

#[test]
fn density_power_of_single_mode() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mu03.json", &mode_json(0.3));
    let out = run(&["density-power", "--r", "2", "--measure", "liouville", "--input", input.to_str().unwrap()]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let w = v["w"].as_f64().unwrap();
    assert!((w - 6.0 * PI / 5.0).abs() < 1e-12 * w);
    assert_eq!(v["measure"], "liouville");
}

#[test]
fn output_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mu.json", &mode_json(0.2));
    let target = dir.path().join("out.json");
    let direct = run(&["classify", "--input", input.to_str().unwrap()]);
    let filed = run(&["classify", "--input", input.to_str().unwrap(), "--output", target.to_str().unwrap()]);
    assert!(filed.status.success());
    assert_eq!(std::fs::read(&target).unwrap(), direct.stdout);
}

#[test]
fn normal_form_and_fermion_commands_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "mu.json", &mode_json(0.2));
    let out = run(&["normal-form", "--input", input.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["mus"][0].as_f64().unwrap() - 0.2).abs() < 1e-14);

    let c = write(dir.path(), "c.json", r#"{"dim": 3, "re": [[0.2, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.9]]}"#);
    let out = run(&["fermion", "--r", "2", "--input", c.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    // real diagonal C is its own conjugate: the scaled value is c^r/(c^r + c^r) = 1/2
    for x in v["flowed_eigenvalues"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 0.5).abs() < 1e-14);
    }
    assert!(v["limits"].is_null());
    assert!(v["limits_skipped"].is_string());
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    let out = run(&["flow", "--r", "2", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let not_hermitian = write(dir.path(), "nh.json", r#"{"dim": 2, "re": [[1.0, 0.5], [0.0, 1.0]]}"#);
    let out = run(&["flow", "--r", "2", "--input", not_hermitian.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).to_lowercase().contains("hermitian"));

    let input = write(dir.path(), "mu.json", &mode_json(0.2));
    let out = run(&["flow", "--r", "-1", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["trajectory", "--r-grid", "4,2", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["flow", "--r", "2", "--input", input.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_passes_and_is_deterministic() {
    let a = run(&["verify", "--seed", "11", "--format", "json"]);
    let b = run(&["verify", "--seed", "11", "--format", "json"]);
    assert!(a.status.success(), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["seed"], 11);
}
