use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aniso(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aniso"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}):\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn check_norms_passes() {
    let out = aniso(&["check-norms", "--set", "samples=2000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["payload"]["all_passed"], true);
    assert_eq!(v["payload"]["norms"].as_array().unwrap().len(), 12);
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "domain = square:8\np = two\n");
    let out = aniso(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let v = json_of(&out);
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["key"], "p");
    assert!(String::from_utf8_lossy(&out.stderr).contains("`p`"));

    let out = aniso(&["solve", "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json_of(&out)["error"]["key"], "colour");

    let out = aniso(&["solve", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gate_violations_exit_4() {
    for set in ["delta=1", "gamma=0", "p=1.5"] {
        let extra = if set == "p=1.5" { "norm=lt:4" } else { "p=2" };
        let out = aniso(&["solve", "--set", set, "--set", extra]);
        assert_eq!(out.status.code(), Some(4), "{set}");
        assert_eq!(json_of(&out)["error"]["kind"], "gate");
    }
    let out = aniso(&["extremal", "--set", "weight=power:1.5", "--set", "s=2"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn inner_failure_exits_3_with_partial_report() {
    let out = aniso(&["solve", "--set", "domain=square:8", "--set", "max_inner_iters=2"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json_of(&out);
    assert_eq!(v["error"]["kind"], "convergence");
    assert_eq!(v["payload"]["report"]["failure"]["n"], 1);
    assert_eq!(v["payload"]["report"]["converged"], false);
}

#[test]
fn extremal_refuses_unconverged_solve() {
    let out = aniso(&["extremal", "--set", "domain=square:8", "--set", "n_max_exp=3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_payload_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", "# small run\ndomain = square:8\nf = 1 + x\ng = 1\n");
    let runs: Vec<Value> = (0..2)
        .map(|_| {
            let out = aniso(&["solve", "--config", &cfg, "--seed", "11"]);
            assert_eq!(out.status.code(), Some(0));
            json_of(&out)
        })
        .collect();
    assert_eq!(
        serde_json::to_string(&runs[0]["payload"]).unwrap(),
        serde_json::to_string(&runs[1]["payload"]).unwrap()
    );
    assert_eq!(runs[0]["config"]["seed"], "11");
    assert_eq!(runs[0]["payload"]["report"]["spec"]["seed"], 11);
}

#[test]
fn solve_csv_and_field_export() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("history.csv");
    let field_path = dir.path().join("u.csv");
    let out = aniso(&[
        "solve",
        "--set",
        "domain=disk:6",
        "--set",
        "n_max_exp=4",
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
        "--field",
        field_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let history = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines[0], "n,norm,sup,min_interior,inner_iters,energy");
    assert_eq!(lines.len(), 6);
    let field = std::fs::read_to_string(&field_path).unwrap();
    assert!(field.starts_with("vertex_id,x,y,value\n"));
}

#[test]
fn exponential_solve_reports_comparison() {
    let out = aniso(&["solve", "--set", "kind=exponential", "--set", "domain=square:6", "--set", "n_max_exp=6"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert!(v["payload"]["min_above_linear_comparison"].as_f64().unwrap() >= -1e-10);
}

#[test]
fn extremal_two_routes_agree() {
    let out = aniso(&["extremal", "--set", "domain=square:8", "--set", "trials=50"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    let p = &v["payload"];
    assert!(p["rel_gap"].as_f64().unwrap() <= 0.02);
    assert!(p["normalization_residual"].as_f64().unwrap() <= 1e-10);
    let checks = p["inequality_checks"].as_array().unwrap();
    assert_eq!(checks[0]["violations"], 0);
    // on a coarse mesh smoothed random fields may already beat 1.05 μ, so
    // the first witness need not be the extremal
    assert!(checks[1]["violations"].as_u64().unwrap() >= 1);
    assert!(checks[1]["witness"]["trial"].as_u64().unwrap() <= 50);
}

#[test]
fn verify_with_given_constant() {
    let out = aniso(&["verify", "--set", "domain=square:8", "--set", "trials=20", "--set", "constant=1e3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,seed,lhs,rhs,violated");
    // 20 random fields plus the extremal, all violating for a huge constant
    assert_eq!(lines.len(), 22);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn sweep_keeps_every_point_in_grid_order() {
    let out = aniso(&[
        "sweep",
        "--jobs",
        "3",
        "--format",
        "csv",
        "--set",
        "domain=square:6",
        "--set",
        "sweep_p=1.5,2",
        "--set",
        "sweep_norm=euclidean,lt:4",
        "--set",
        "sweep_delta=0.25,0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p,delta,nu,norm,mu_formula,mu_direct,rel_gap,converged");
    assert_eq!(lines.len(), 9);
    let keys: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(4).collect::<Vec<_>>().join(",")).collect();
    assert_eq!(
        keys,
        [
            "1.5,0.25,0,euclidean",
            "1.5,0.25,0,lt:4",
            "1.5,0.5,0,euclidean",
            "1.5,0.5,0,lt:4",
            "2,0.25,0,euclidean",
            "2,0.25,0,lt:4",
            "2,0.5,0,euclidean",
            "2,0.5,0,lt:4",
        ]
    );
    // the p-gate rejects lt:4 at p = 1.5
    assert!(lines[2].ends_with(",,,,false"));
    assert!(lines[1].ends_with(",true"));
}
