mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use msp::cli::{run, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};
use msp::harness::instances::hidden_rotation;
use msp::harness::{gen_instance, run_compare, CompareOptions, InstanceSpec, SolverKind};
use msp::io::{read_matrix, read_vector, write_matrix};
use msp::linalg::{DenseMatrix, Matrix};

fn msp(args: &[&str]) -> i32 {
    let mut argv = vec!["msp"];
    argv.extend_from_slice(args);
    run(argv)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn hidden_rotation_small_case() {
    // Rotation between the second and fifth coordinates.
    let (a, x) = hidden_rotation(6, 1, 4).unwrap();
    assert_eq!(x, vec![1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    let ax = a.to_dense().matvec(&x);
    assert!(ax.iter().all(|v| (v - 1.0).abs() < 1e-15));
    let mut sv: Vec<f64> = na(&a.to_dense()).singular_values().iter().copied().collect();
    sv.sort_by(|p, q| q.total_cmp(p));
    let expect = [2f64.sqrt(), 2f64.sqrt(), 1.0, 1.0, 1.0, 1.0];
    for (s, e) in sv.iter().zip(expect) {
        assert!((s - e).abs() < 1e-12);
    }
    assert!(hidden_rotation(6, 3, 3).is_err());
}

#[test]
fn k_large_spectrum_is_exact() {
    let inst = gen_instance(&InstanceSpec::k_large_psd(64, 4, 100.0, 3)).unwrap();
    let target = inst.spec.target_values();
    let got = sym_eigs(&dense_of(&inst.a));
    assert_eq!(got.len(), 64);
    for (g, t) in got.iter().zip(&target) {
        assert!((g - t).abs() < 1e-10 * target[0], "{g} vs {t}");
    }
    assert!(target[..4].iter().all(|v| *v >= 100.0) && target[4..].iter().all(|v| (1.0..=2.0).contains(v)));
}

#[test]
fn generation_is_reproducible() {
    let spec = InstanceSpec::k_large_general(80, 60, 4, 1e3, 9);
    let a = gen_instance(&spec).unwrap();
    let b = gen_instance(&spec).unwrap();
    assert_eq!(a.a.to_dense(), b.a.to_dense());
    assert_eq!(a.b, b.b);
    let other = gen_instance(&InstanceSpec { seed: 10, ..spec }).unwrap();
    assert_ne!(a.b, other.b);
}

#[test]
fn compare_on_identity_and_k_large() {
    let n = 128;
    let id = to_matrix(&nalgebra::DMatrix::identity(n, n)).into_symmetric_psd().unwrap();
    let b = gaussian(n, 1);
    let opts = CompareOptions { warmup: false, l: 16, ..CompareOptions::default() };
    let rep = run_compare(&id, &b, serde_json::Value::Null, &opts);
    for row in &rep.rows {
        if row.error.is_none() && row.solver != SolverKind::DenseDirect.name() {
            assert!(row.iterations <= 2, "{row:?}");
        }
    }
    let dense = rep.row(SolverKind::DenseDirect).unwrap();
    assert!(dense.residual <= 1e-12);

    let inst = gen_instance(&InstanceSpec::k_large_psd(512, 8, 1e4, 2)).unwrap();
    let opts = CompareOptions {
        warmup: false,
        l: 32,
        solvers: vec![SolverKind::PlainLanczos, SolverKind::MspPsd, SolverKind::DenseDirect],
        ..CompareOptions::default()
    };
    let rep = run_compare(&inst.a, &inst.b, serde_json::Value::Null, &opts);
    let plain = rep.row(SolverKind::PlainLanczos).unwrap();
    let fast = rep.row(SolverKind::MspPsd).unwrap();
    assert!(fast.iterations < plain.iterations, "{} vs {}", fast.iterations, plain.iterations);
    for row in &rep.rows {
        assert!(row.residual <= 2.0 * row.claimed_residual.max(1e-15), "{row:?}");
    }
    let again = run_compare(&inst.a, &inst.b, serde_json::Value::Null, &opts);
    let counts = |r: &msp::harness::BenchmarkReport| r.rows.iter().map(|x| x.iterations).collect::<Vec<_>>();
    assert_eq!(counts(&rep), counts(&again));
}

#[test]
fn matrix_files_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let a = Matrix::dense(DenseMatrix::from_rows(&[vec![1.5, 0.0, -2.0], vec![0.25, 3.0, 0.0]]).unwrap());
    for name in ["a.mtx", "a.mspm"] {
        let path = dir.path().join(name);
        write_matrix(&path, &a).unwrap();
        assert_eq!(read_matrix(&path).unwrap().to_dense(), a.to_dense());
    }
}

#[test]
fn gen_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("k.mtx");
    let json = dir.path().join("report.json");
    let sol = dir.path().join("x.txt");
    assert_eq!(msp(&["--seed", "3", "gen", "--kind", "k-large-psd", "--n", "256", "--k", "8", "--out", p(&mtx)]), EXIT_OK);
    let rhs = dir.path().join("k.rhs.txt");
    assert!(rhs.exists());
    let code = msp(&[
        "--json-out",
        p(&json),
        "solve",
        "--matrix",
        p(&mtx),
        "--rhs",
        p(&rhs),
        "--method",
        "msp-psd",
        "--eps",
        "1e-8",
        "--l",
        "16",
        "--solution-out",
        p(&sol),
    ]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["status"], "converged");
    assert_eq!(report["schema"], 1);
    let a = dense_of(&read_matrix(&mtx).unwrap());
    let b = read_vector(&rhs).unwrap();
    let x = read_vector(&sol).unwrap();
    assert!(rel_energy_err(&a, &x, &spd_solve(&a, &b)) <= 1e-8);
}

#[test]
fn hidden_rotation_generation_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let mtx = dir.path().join("h.mtx");
    assert_eq!(msp(&["--seed", "7", "gen", "--kind", "hidden-rotation", "--n", "1000", "--out", p(&mtx)]), EXIT_OK);
    let sol = read_vector(&dir.path().join("h.sol.txt")).unwrap();
    assert_eq!(sol.len(), 1000);
    assert_eq!(sol.iter().filter(|v| **v == 0.0).count(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(msp(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(msp(&["solve", "--eps", "abc"]), EXIT_USAGE);
    assert_eq!(msp(&["solve", "--matrix", p(&dir.path().join("missing.mtx"))]), EXIT_USAGE);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "not_a_key = 3\n").unwrap();
    assert_eq!(msp(&["--config", p(&bad), "selftest"]), EXIT_USAGE);

    // A hard system with a single permitted outer iteration cannot reach 1e-12.
    let mtx = dir.path().join("hard.mtx");
    assert_eq!(msp(&["gen", "--kind", "k-large-psd", "--n", "256", "--ratio", "1e6", "--out", p(&mtx)]), EXIT_OK);
    let code = msp(&["solve", "--matrix", p(&mtx), "--method", "plain-lanczos", "--eps", "1e-12", "--max-iters", "1"]);
    assert_eq!(code, EXIT_NOT_CONVERGED);
}

#[test]
fn config_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tuning.toml");
    std::fs::write(&cfg, "sketch_factor = 2.0\nlambda0_probes = 10\n").unwrap();
    let mtx = dir.path().join("k.mtx");
    let json = dir.path().join("r.json");
    assert_eq!(msp(&["gen", "--n", "300", "--out", p(&mtx)]), EXIT_OK);
    let code = msp(&["--config", p(&cfg), "--json-out", p(&json), "solve", "--matrix", p(&mtx), "--l", "16"]);
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["config"]["tuning"]["sketch_factor"], 2.0);
    assert_eq!(report["config"]["tuning"]["lambda0_probes"], 10);
}

#[test]
fn binary_subcommands() {
    let exe = env!("CARGO_BIN_EXE_msp");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Command::new(exe).args(args).output().unwrap();

    let out = status(&["--threads", "2", "selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).lines().all(|l| l.starts_with("PASS")));

    let json = dir.path().join("bench.json");
    let out = status(&["--json-out", p(&json), "bench", "--n", "256", "--k", "8", "--l", "16", "--solvers", "plain-lanczos,msp-psd"]);
    assert_eq!(out.status.code(), Some(0));
    let bench: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(bench["rows"].as_array().unwrap().len(), 2);

    let mtx = dir.path().join("g.mtx");
    assert_eq!(status(&["gen", "--kind", "k-large-general", "--n", "200", "--m", "260", "--out", p(&mtx)]).status.code(), Some(0));
    let rhs = dir.path().join("g.rhs.txt");
    let out = status(&["compare", "--matrix", p(&mtx), "--rhs", p(&rhs), "--solvers", "msp-general,dense-direct", "--l", "16"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(status(&["gen"]).status.code(), Some(1));
    assert_eq!(status(&["--help"]).status.code(), Some(0));
}
