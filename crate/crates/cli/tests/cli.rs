use std::path::PathBuf;
use std::process::{Command, Output};

use cocycle_core::{PressureEstimate, SpectrumPoint};

fn data(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    root.to_str().unwrap().to_string()
}

fn cocycle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cocycle")).args(args).output().unwrap()
}

fn cocycle_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cocycle")).args(args).env(key, value).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cocycle-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn pressure_record_for_diag_pair() {
    let o = cocycle(&["pressure", "--cocycle", &data("diag-pair.json"), "--q", "1,0", "--depth", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let est: PressureEstimate = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((est.value - 1.6768).abs() < 5e-5);
    assert_eq!(est.depth, 10);
}

#[test]
fn json_round_trip_is_bit_exact() {
    let o = cocycle(&[
        "pressure", "--cocycle", &data("typical-pair.json"), "--q", "0.3,-1.7", "--q", "2,1", "--depths", "4,6,8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines() {
        let est: PressureEstimate = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&est).unwrap(), line);
    }
    let o = cocycle(&["spectrum", "--cocycle", &data("typical-pair.json"), "--alpha", "0.8,-0.2", "--depth", "8"]);
    let line = stdout(&o);
    let p: SpectrumPoint = serde_json::from_str(line.trim()).unwrap();
    assert_eq!(serde_json::to_string(&p).unwrap(), line.trim());
}

#[test]
fn typical_pair_search_succeeds() {
    let o = cocycle(&[
        "check-typical", "--cocycle", &data("typical-pair.json"), "--max-period", "2", "--max-bridge", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["result"], "found");
    assert_eq!(v["report"]["overall"], "typical");
    assert_eq!(v["report"]["spec"]["bridge_word"], "2");
}

#[test]
fn margin_inside_band_is_inconclusive() {
    let o = cocycle(&[
        "check-typical", "--cocycle", &data("typical-pair.json"), "--periodic", "1", "--bridge", "2", "--tol", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["overall"], "inconclusive");
}

#[test]
fn far_alpha_reports_infeasible() {
    let o = cocycle(&["spectrum", "--cocycle", &data("diag-pair.json"), "--alpha", "10,10", "--depth", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["status"], "infeasible");
}

#[test]
fn csv_headers() {
    let o = cocycle(&[
        "pressure", "--cocycle", &data("diag-pair.json"), "--q", "1,0", "--depths", "4,8", "--format", "csv",
    ]);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q_1,q_2,n,value,grad_1,grad_2,upper,lower,gap"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 9);
    assert_eq!(row[7], "");

    let o = cocycle(&[
        "spectrum", "--cocycle", &data("scalar-pair.json"), "--alpha", "0", "--alpha", "0.3", "--depth", "10",
        "--format", "csv",
    ]);
    let text = stdout(&o);
    assert_eq!(text.lines().next(), Some("alpha_1,value,status,q_1"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn singular_generator_is_a_validation_error() {
    let path = temp_file("singular.json", r#"{"d": 2, "k": 2, "matrices": [[[1, 0], [0, 1]], [[1, 2], [2, 4]]]}"#);
    let o = cocycle(&["lyapunov", "--cocycle", path.to_str().unwrap(), "--depth", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generator 2 is singular"));
}

#[test]
fn ragged_file_is_a_parse_error() {
    let path = temp_file("ragged.json", "{\"d\": 2, \"k\": 1,\n\"matrices\": [[[1, 0], [0]]]}");
    let o = cocycle(&["lyapunov", "--cocycle", path.to_str().unwrap(), "--depth", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn budget_overrun_exits_three() {
    let args = ["pressure", "--cocycle", &data("diag-pair.json"), "--q", "1,0", "--depth", "12"];
    let o = cocycle_env(&args, "COCYCLE_BUDGET", "1000");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("budget 1000"));
    let o = cocycle_env(&args, "COCYCLE_BUDGET", "5000");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn wrong_lengths_and_usage_errors_exit_two() {
    let o = cocycle(&["pressure", "--cocycle", &data("diag-pair.json"), "--q", "1", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cocycle(&["pressure", "--cocycle", &data("diag-pair.json"), "--q", "1,0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cocycle(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cocycle(&["spectrum", "--cocycle", &data("diag-pair.json"), "--alpha", "0,1", "--depth", "4"]);
    assert_eq!(o.status.code(), Some(2), "unsorted alpha must be rejected");
}

#[test]
fn dominated_and_not_dominated() {
    let o = cocycle(&["check-dominated", "--cocycle", &data("positive-pair.json"), "--depths", "1..12"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "dominated");
    let o = cocycle(&["check-dominated", "--cocycle", &data("inverse-pair.json"), "--samples", "500"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["verdict"], "not-dominated");
}

#[test]
fn lyapunov_markov_and_crosscheck() {
    let o = cocycle(&[
        "lyapunov", "--cocycle", &data("diag-pair.json"), "--family", "markov", "--measure", "0.5,0.5,0.5,0.5",
        "--depth", "10",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["exponents"][0].as_f64().unwrap() - 0.863726).abs() < 1e-6);

    let o = cocycle(&["crosscheck", "--cocycle", &data("scalar-pair.json"), "--q", "1", "--depth", "12"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(v["gap"].as_f64().unwrap() >= -1e-8);
}

#[test]
fn omega_writes_to_output_file() {
    let out = std::env::temp_dir().join(format!("cocycle-omega-{}.csv", std::process::id()));
    let o = cocycle(&[
        "omega", "--cocycle", &data("scalar-pair.json"), "--depth", "12", "--format", "csv", "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("alpha_1"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn deterministic_spectrum_is_byte_identical() {
    let run = |threads: &str| {
        cocycle(&[
            "spectrum", "--cocycle", &data("twisted-triple.json"), "--alpha", "0.9,0.2,-0.6", "--alpha",
            "0.7,0.3,-0.5", "--depth", "8", "--deterministic", "--threads", threads,
        ])
        .stdout
    };
    let one = run("1");
    assert!(!one.is_empty());
    assert_eq!(one, run("3"));
    assert_eq!(one, run("8"));
}
