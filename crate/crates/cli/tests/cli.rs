use std::fs;
use std::process::Command;

fn oplab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oplab"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().expect("exit code")
}

#[test]
fn empty_suite_selection_passes() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(oplab().args(["verify", "--suite", "", "--out"]).arg(dir.path()));
    assert_eq!(status, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["failures"].as_array().unwrap().is_empty());
    assert!(report["suites"].as_object().unwrap().is_empty());
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn negative_tolerance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = oplab().args(["verify", "--tol-res", "-1e-8", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tolerances.residual"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn config_file_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 3\n[tolerances]\nquadrature = \"tight\"\n").unwrap();
    let out = oplab().arg("verify").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    fs::write(&cfg, "sede = 3\n").unwrap();
    assert_eq!(code(oplab().arg("verify").arg("--config").arg(&cfg)), 2);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "seed = 9\ndims = [3]\nn_instances = 1\nsuites = [\"core\"]\n").unwrap();
    let out = dir.path().join("out");
    let status = code(oplab().arg("verify").arg("--config").arg(&cfg).args(["--seed", "4", "--out"]).arg(&out));
    assert_eq!(status, 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 4);
    assert_eq!(report["config"]["dims"], serde_json::json!([3]));
}

#[test]
fn doi_suite_records_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(
        oplab()
            .args(["verify", "--suite", "doi", "--dims", "2,3", "--n-instances", "2", "--workers", "2", "--out"])
            .arg(dir.path()),
    );
    assert_eq!(status, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let rows = report["records"]["doi/residuals"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["residual"].as_f64().unwrap() <= 1e-8));
}

#[test]
fn assertion_failure_exits_one_with_repro() {
    let dir = tempfile::tempdir().unwrap();
    // A residual tolerance far below rounding level forces failures.
    let out = oplab()
        .args(["verify", "--suite", "doi", "--dims", "3", "--n-instances", "1", "--tol-res", "1e-300", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let failures = report["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    for f in failures {
        assert!(f["repro"].as_str().unwrap().starts_with("oplab verify --seed"));
        let dump = dir.path().join("failures").join(f["dump_file"].as_str().unwrap());
        assert!(fs::read_to_string(dump).unwrap().starts_with("# L\n3 3\n"));
    }
}

#[test]
fn xi_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let status = code(oplab().args(["xi", "--seed", "5", "--dim", "3", "--out"]).arg(d.path()));
        assert_eq!(status, 0);
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "xi.csv"), read(&b, "xi.csv"));
    assert_eq!(read(&a, "xi_summary.json"), read(&b, "xi_summary.json"));
    assert!(String::from_utf8(read(&a, "xi.csv")).unwrap().starts_with("s,re_xi,im_xi\n"));
}

#[test]
fn xi_of_zero_perturbation_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = oplab().args(["xi", "--zero", "--dim", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("weight integral: 0e0"));
    let csv = fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.0,0.0")));
}

#[test]
fn xi_scalar_pair_writes_oracle_file() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(oplab().args(["xi", "--lambda", "0+1i", "--mu", "1+1i", "--out"]).arg(dir.path()));
    assert_eq!(status, 0);
    let oracle = fs::read_to_string(dir.path().join("xi_oracle.csv")).unwrap();
    let xi = fs::read_to_string(dir.path().join("xi.csv")).unwrap();
    assert_eq!(oracle.lines().count(), xi.lines().count());
}

#[test]
fn xi_rejects_non_strict_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(oplab().args(["xi", "--lambda", "1+0i", "--mu", "2+0i", "--out"]).arg(dir.path()));
    assert_eq!(status, 1);
    assert!(!dir.path().join("xi.csv").exists());
}

#[test]
fn dilate_and_probe_commands() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(oplab().args(["dilate", "--seed", "2", "--dim", "3", "--depth", "16", "--out"]).arg(dir.path()));
    assert_eq!(status, 0);
    assert!(fs::read_to_string(dir.path().join("dilation_u.txt")).unwrap().starts_with("54 54\n"));

    let out = oplab()
        .args(["probe-multiplier", "--function", "resolvent", "--sizes", "8,16", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("multiplier.json")).unwrap()).unwrap();
    for r in rows.as_array().unwrap() {
        assert!((r["upper"].as_f64().unwrap() - 1.0).abs() <= 0.05);
        assert_eq!(r["trend"], "stable");
    }
    assert_eq!(code(oplab().args(["probe-multiplier", "--function", "no_such_function"])), 2);
}

#[test]
fn report_merge_combines_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = vec![];
    for seed in ["0", "1"] {
        let out = dir.path().join(format!("r{seed}"));
        let status = code(
            oplab()
                .args(["verify", "--suite", "core", "--dims", "2", "--n-instances", "1", "--seed", seed, "--out"])
                .arg(&out),
        );
        assert_eq!(status, 0);
        paths.push(out.join("report.json"));
    }
    let merged = dir.path().join("merged");
    let status = code(oplab().arg("report-merge").args(&paths).arg("--out").arg(&merged));
    assert_eq!(status, 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(merged.join("report.json")).unwrap()).unwrap();
    assert_eq!(m["configs"].as_array().unwrap().len(), 2);
    let one: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
    assert_eq!(
        m["suites"]["core"]["passed"].as_u64().unwrap(),
        2 * one["suites"]["core"]["passed"].as_u64().unwrap()
    );
}

#[test]
fn verify_report_is_deterministic_apart_from_timing() {
    let strip = |p: &std::path::Path| {
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (d, w) in [(&a, "1"), (&b, "4")] {
        let status = code(
            oplab()
                .args(["verify", "--suite", "core,funcalc,shift", "--dims", "2,3", "--n-instances", "2", "--workers", w, "--out"])
                .arg(d.path()),
        );
        assert_eq!(status, 0);
    }
    assert_eq!(strip(a.path()), strip(b.path()));
}
