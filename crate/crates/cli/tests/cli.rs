use std::process::{Command, Output};

fn riemann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riemann")).args(args).env_remove("RIEMANN_TOL").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn dispersion_subsystem_roots() {
    let out = riemann(&["dispersion", "--system", "builtin:plasticity-subsystem", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let roots: Vec<[f64; 2]> = serde_json::from_value(v["roots"].clone()).unwrap();
    assert_eq!(roots.len(), 2);
    assert!((roots[0][0]).abs() <= 1e-10 && (roots[0][1] - 1.0).abs() <= 1e-10);
    assert!((roots[1][0]).abs() <= 1e-10 && (roots[1][1] + 1.0).abs() <= 1e-10);
    assert_eq!(v["kernels"][0].as_array().unwrap().len(), 2);
}

#[test]
fn verify_waveparticle_example_passes() {
    let out = riemann(&["verify", "waveparticle", "--psi", "exp(r)", "--a", "1", "--n", "1", "--grid", "default", "--tol", "1e-6"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["pass"], true);
}

#[test]
fn corrupted_report_is_still_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = riemann(&[
        "verify",
        "plasticity",
        "--family",
        "case-i",
        "--params",
        r#"{"c1":{"const":[1,0]}}"#,
        "--tol",
        "1e-5",
        "--corrupt",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(report["equations"].as_array().unwrap().len() >= 5);
}

#[test]
fn exit_code_matches_report_pass() {
    for args in [
        vec!["verify", "plasticity"],
        vec!["verify", "plasticity", "--family", "case-ii", "--params", r#"{"c2":{"const":[0,-0.5]}}"#],
        vec!["verify", "system", "--system", "builtin:plasticity-subsystem"],
        vec!["verify", "system", "--system", "builtin:wave-particle", "--psi", "r"],
        vec!["verify", "waveparticle", "--psi", "r + r^3/10", "--a", "1.4142135623730951"],
    ] {
        for corrupt in [false, true] {
            let mut a = args.clone();
            if corrupt {
                a.push("--corrupt");
            }
            let out = riemann(&a);
            let pass = stdout_json(&out)["pass"].as_bool().unwrap();
            assert_eq!(pass, !corrupt, "{a:?}");
            assert_eq!(code(&out), if pass { 0 } else { 1 }, "{a:?}");
        }
    }
}

#[test]
fn environment_tolerance_override() {
    let run = |tol: &str| {
        Command::new(env!("CARGO_BIN_EXE_riemann"))
            .args(["verify", "plasticity", "--family", "case-i"])
            .env("RIEMANN_TOL", tol)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("1e-8")), 0);
    assert_eq!(code(&run("1e-40")), 1);
    assert_eq!(code(&run("abc")), 2);
    // An explicit flag wins over the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_riemann"))
        .args(["verify", "plasticity", "--family", "case-i", "--tol", "1e-8"])
        .env("RIEMANN_TOL", "1e-40")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn ode_and_trace_controls() {
    assert_eq!(code(&riemann(&["ode417"])), 0);
    assert_eq!(code(&riemann(&["ode417", "--corrupt"])), 1);
    let out = riemann(&["tracecheck"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["points"].as_array().unwrap().len(), 20);
    assert_eq!(code(&riemann(&["tracecheck", "--corrupt"])), 1);
}

#[test]
fn die_outputs() {
    let out = riemann(&["die", "--figure", "fig1"]);
    assert_eq!(code(&out), 0);
    let svg = String::from_utf8(out.stdout).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert!(doc.descendants().filter(|n| n.has_tag_name("path")).count() >= 9);
    let out = riemann(&["die", "--figure", "fig2", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("curve_id,s,x,y,u,v\n"));
    assert_eq!(code(&riemann(&["die", "--figure", "fig9"])), 2);
}

#[test]
fn die_stagnation_seed_is_numerical_failure() {
    let config = r#"{"params":{"family":"case-i"},"feed":[0,0],"exit":[0,0],"seeds":[[0,0]]}"#;
    assert_eq!(code(&riemann(&["die", "--params", config])), 3);
}

#[test]
fn inhom_check_reports() {
    let out = riemann(&["inhom-check"]);
    assert_eq!(code(&out), 1);
    assert_eq!(stdout_json(&out)["diagnostics"].as_array().unwrap().len(), 4);
    // Ω = 0 leaves −b.
    let out = riemann(&["inhom-check", "--rotation", r#"[["1","0"],["0","1"]]"#, "--omega", "0", "--state", "0, pi"]);
    let v = stdout_json(&out);
    let r: Vec<[f64; 2]> = serde_json::from_value(v["residual"].clone()).unwrap();
    // b = (√2 sin(π/2), −√2 cos(π/2)) at u = 0, a = 1.
    assert!((r[0][0] + 2f64.sqrt()).abs() < 1e-12 && r[1][0].abs() < 1e-12);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&riemann(&["frobnicate"])), 2);
    assert_eq!(code(&riemann(&["verify", "plasticity", "--tol", "-1"])), 2);
    assert_eq!(code(&riemann(&["verify", "waveparticle", "--psi", "abs(r)"])), 2);
    assert_eq!(code(&riemann(&["verify", "waveparticle", "--psi", "r", "--n", "2"])), 2);
    assert_eq!(code(&riemann(&["verify", "plasticity", "--params", r#"{"c9":1}"#])), 2);
    assert_eq!(code(&riemann(&["verify", "system", "--system", "/nonexistent.json"])), 2);
}

#[test]
fn outputs_are_deterministic() {
    for args in [vec!["verify", "plasticity"], vec!["tracecheck"], vec!["die", "--figure", "fig2", "--format", "csv"]] {
        assert_eq!(riemann(&args).stdout, riemann(&args).stdout, "{args:?}");
    }
}

#[test]
fn system_file_with_expression_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sys.json");
    // u_x + v_y = 0 and u_y - v_x = 0.
    std::fs::write(
        &path,
        r#"{"p":2,"q":2,"m":2,"vars":["u","v"],"A":[[["1","0"],["0","-1"]],[["0","1"],["1","0"]]],"b":["0","0"]}"#,
    )
    .unwrap();
    let sys = path.to_str().unwrap();
    let ok = riemann(&["verify", "system", "--system", sys, "--fields", r#"{"u":"x^2-y^2","v":"-2*x*y"}"#]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = riemann(&["verify", "system", "--system", sys, "--fields", r#"{"u":"x^2","v":"y"}"#]);
    assert_eq!(code(&bad), 1);
    assert_eq!(code(&riemann(&["verify", "system", "--system", sys])), 2);
}
