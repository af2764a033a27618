use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn agdcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agdcert"))
        .args(args)
        .env_remove("AGDCERT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn agd_run_quad1d_writes_one_row_per_step() {
    let p = data("quad1d.json");
    let o = agdcert(&[
        "agd",
        "run",
        "--problem",
        p.to_str().unwrap(),
        "--schedule",
        "s1",
        "--iters",
        "50",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 51);
    assert!(lines[0].starts_with("k,f_xbar,f_xunder,gap_xbar,gap_xunder,bound_"));
    assert!(lines[0].ends_with(",vi_residual"));
    // x̄_2 = 1/6, f(x̲_2) = 1/8
    let row2: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row2[1] - 1.0 / 72.0).abs() < 1e-15);
    assert_eq!(row2[2], 0.125);
}

#[test]
fn agd_run_zero_iters_is_config_error() {
    let p = data("quad1d.json");
    let o = agdcert(&[
        "agd",
        "run",
        "--problem",
        p.to_str().unwrap(),
        "--iters",
        "0",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn s3_on_unbounded_set_marks_diameter_bounds_inapplicable() {
    let p = data("quad1d.json");
    let o = agdcert(&[
        "agd",
        "run",
        "--problem",
        p.to_str().unwrap(),
        "--schedule",
        "s3",
        "--iters",
        "20",
    ]);
    assert_eq!(code(&o), 0);
    let header = stdout(&o).lines().next().unwrap().to_string();
    assert!(!header.contains("xbar_s3"));
    assert!(!header.contains("euclid_s3"));

    let o = agdcert(&[
        "--format",
        "json",
        "agd",
        "certify",
        "--problem",
        p.to_str().unwrap(),
        "--schedule",
        "s3",
        "--iters",
        "20",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s3 = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == "xbar_s3")
        .unwrap();
    assert_eq!(s3["applicable"], false);
}

#[test]
fn agd_runs_pass_on_sample_problems() {
    for f in [
        "box_qp.json",
        "ball_qp.json",
        "simplex_entropy.json",
        "logsumexp.json",
    ] {
        for s in ["s1", "s2", "s3"] {
            let p = data(f);
            let o = agdcert(&[
                "agd",
                "certify",
                "--problem",
                p.to_str().unwrap(),
                "--schedule",
                s,
                "--iters",
                "60",
            ]);
            assert_eq!(code(&o), 0, "{f} {s}: {}", stdout(&o));
        }
    }
}

#[test]
fn gradcheck_exit_codes() {
    for f in ["box_qp.json", "logsumexp.json"] {
        let p = data(f);
        assert_eq!(
            code(&agdcert(&["gradcheck", "--problem", p.to_str().unwrap()])),
            0
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("nan.json");
    fs::write(
        &bad,
        r#"{"kind":"quadratic","dimension":1,"data":{"Q":[NaN],"q":[0]},"set":{"tag":"whole_space"},"x0":[1]}"#,
    )
    .unwrap();
    assert_eq!(
        code(&agdcert(&["gradcheck", "--problem", bad.to_str().unwrap()])),
        2
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        code(&agdcert(&[
            "gradcheck",
            "--problem",
            missing.to_str().unwrap()
        ])),
        2
    );
}

#[test]
fn sdp_solve_two_by_two() {
    let p = data("sdp_2x2.json");
    let o = agdcert(&[
        "--format",
        "json",
        "sdp",
        "solve",
        "--instance",
        p.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["objective"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    assert_eq!(v["status"], "solved");
}

#[test]
fn pep_sweep_solve_verify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let certs = dir.path().join("certs");
    let o = agdcert(&[
        "--out",
        csv.to_str().unwrap(),
        "pep",
        "sweep",
        "--n-min",
        "3",
        "--n-max",
        "4",
        "--modes",
        "general,fixed,conjecture",
        "--cert-dir",
        certs.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "N,mode,d,d_scaled_by_N_sq,linear_residual,min_eig,solve_seconds,verified"
    );
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));

    let cert = certs.join("cert_N3_general.json");
    let o = agdcert(&[
        "--format",
        "json",
        "pep",
        "verify",
        "--certificate",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verification"]["verified"], true);

    // zeroing every weight must fail verification
    let mut c: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    for w in c["weights"].as_array_mut().unwrap() {
        w["weight"] = 0.0.into();
    }
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, c.to_string()).unwrap();
    assert_eq!(
        code(&agdcert(&[
            "pep",
            "verify",
            "--certificate",
            tampered.to_str().unwrap()
        ])),
        1
    );
}

#[test]
fn pep_config_errors() {
    assert_eq!(
        code(&agdcert(&["pep", "sweep", "--n-min", "2", "--n-max", "4"])),
        2
    );
    assert_eq!(
        code(&agdcert(&[
            "pep", "sweep", "--n-max", "4", "--modes", "bogus"
        ])),
        2
    );
    assert_eq!(
        code(&agdcert(&[
            "pep",
            "solve",
            "--n",
            "3",
            "--mode",
            "fixed",
            "--schedule",
            "s2"
        ])),
        2
    );
    assert_eq!(
        code(&agdcert(&[
            "pep",
            "solve",
            "--n",
            "3",
            "--mode",
            "fixed",
            "--convention",
            "as-printed"
        ])),
        2
    );
    assert_eq!(code(&agdcert(&["agd", "run"])), 2);
}

#[test]
fn pep_solve_and_table1() {
    let o = agdcert(&[
        "--format", "json", "pep", "solve", "--n", "3", "--mode", "fixed",
    ]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["diagnostics"]["verified"], true);
    assert_eq!(v["diagnostics"]["solve_seconds"], 0.0);

    let o = agdcert(&["pep", "table1", "--n-min", "3", "--n-max", "4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3 + 4);
    for r in rows {
        let (got, want): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((got - want).abs() < 0.15, "{r:?}");
    }
}

#[test]
fn output_is_reproducible_and_env_dir_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let p = data("box_qp.json");
    let run = |name: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_agdcert"))
            .args([
                "--out",
                name,
                "--seed",
                "7",
                "agd",
                "certify",
                "--problem",
                p.to_str().unwrap(),
                "--iters",
                "40",
            ])
            .env("AGDCERT_OUT_DIR", dir.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}
