use std::path::PathBuf;
use std::process::{Command, Output};

fn boundkey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boundkey")).args(args).env_remove("BOUNDKEY_MEM_CAP").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("boundkey-cli-it-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_state_reports_prefactor_and_norm() {
    let out = boundkey(&["verify-state", "--D", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("prefactor = 0.275 (11/40)"));
    assert!(err.contains("trace_norm_X = 1.0"));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["command"], "verify-state");
    assert_eq!(report["passed"], true);
}

#[test]
fn verify_state_larger_dimension() {
    let out = boundkey(&["verify-state", "--D", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("prefactor = 0.276785714286 (31/112)"));
}

#[test]
fn ppt_command() {
    let out = boundkey(&["ppt", "--D", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("ppt = true"));
}

#[test]
fn criterion_csv_to_file() {
    let path = scratch("criterion.csv");
    let out = boundkey(&["criterion", "--D", "3", "--k-max", "4", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "D,k,key_block_trace_norm,gap_to_half,pbit_trace_distance,dense_checked");
    assert_eq!(lines[1], "3,1,0.275,0.225,0.45,true");
    assert_eq!(lines[2], "3,2,0.299504950495,0.200495049505,0.40099009901,true");
    assert!(lines[4].ends_with(",,false"));
}

#[test]
fn output_is_deterministic() {
    let args = ["pbit-mixture", "--seed", "5", "--p1", "0.6"];
    let (a, b) = (boundkey(&args), boundkey(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn protocol_command() {
    let out = boundkey(&["protocol", "--D", "3", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["data"]["steps"][0]["success_probability"], 0.505);
}

#[test]
fn ccq_of_rho_and_of_a_pdit_file() {
    let out = boundkey(&["ccq"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["data"]["p"][0][0], 0.275);
    assert_eq!(report["data"]["secure"], false);

    // basic pbit with a product shield |0><0| ⊗ |0><0|
    let sigma = serde_json::json!({
        "dims": [2, 2],
        "re": [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]],
        "im": vec![vec![0.0; 4]; 4],
    });
    let identity = serde_json::json!({
        "dims": [2, 2],
        "re": [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        "im": vec![vec![0.0; 4]; 4],
    });
    let qubit_id = serde_json::json!({ "dims": [2], "re": [[1.0, 0.0], [0.0, 1.0]], "im": vec![vec![0.0; 2]; 2] });
    let pdit = serde_json::json!({
        "d": 2,
        "shield_dims": [2, 2],
        "sigma": sigma,
        "unitaries": [identity, identity],
        "basis": { "alice": qubit_id, "bob": qubit_id },
    });
    let path = scratch("pdit.json");
    std::fs::write(&path, pdit.to_string()).unwrap();
    let out = boundkey(&["ccq", "--pdit", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["data"]["secure"], true);
    assert_eq!(report["data"]["dw_rate"], 1.0);
}

#[test]
fn export_x_round_trips() {
    let out = boundkey(&["export", "x", "--D", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(m["dims"], serde_json::json!([3, 3]));
    assert!((m["re"][0][4].as_f64().unwrap() - 1.0 / 11.0).abs() < 1e-15);
    let out = boundkey(&["export", "projectors", "--D", "3"]);
    let fam: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(fam.get("S").is_some() && fam.get("P_plus").is_some());
}

#[test]
fn config_file_and_flag_precedence() {
    let path = scratch("config.json");
    std::fs::write(&path, r#"{"D": 4, "k_max": 2, "format": "csv"}"#).unwrap();
    let out = boundkey(&["criterion", "--config", path.to_str().unwrap(), "--k-max", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("4,1,"));
}

#[test]
fn invalid_configs_exit_with_two() {
    assert_eq!(boundkey(&["verify-state", "--D", "2"]).status.code(), Some(2));
    assert_eq!(boundkey(&["pbit-mixture", "--p1", "1.5"]).status.code(), Some(2));
    assert_eq!(boundkey(&["ppt", "--format", "csv"]).status.code(), Some(2));
    assert_eq!(boundkey(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(boundkey(&["ppt", "--config", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn memory_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_boundkey"))
        .args(["ppt", "--k", "2"])
        .env("BOUNDKEY_MEM_CAP", "100")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("memory cap"));
}

#[test]
fn failed_check_exits_with_one() {
    // ρ^(3) has eigenvalues that are zero up to rounding (~1e-17 below zero),
    // so a PSD tolerance of 1e-300 rejects it.
    let out = boundkey(&["verify-state", "--D", "3", "--tol-psd", "1e-300"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("[FAIL] rho_min_eigenvalue"));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["passed"], false);
}
