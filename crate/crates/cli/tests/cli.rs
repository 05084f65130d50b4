use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quasilin_core::Mesh;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasilin"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Value of `key = value` in a report file.
fn value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .to_string()
}

fn number(path: &Path, key: &str) -> f64 {
    value(path, key).parse().unwrap()
}

fn inline(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.ini");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn linear_robin_demo_writes_all_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["solve-elliptic"], &configs().join("robin_linear.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.vtk", "solution.csv", "report.txt", "manifest.txt"] {
        assert!(d.path().join(f).is_file(), "{f} missing");
    }
    assert_eq!(value(&d.path().join("report.txt"), "converged"), "true");
    let manifest = fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("mesh = vertices=289"));
    assert!(manifest.contains("solver.tol = 1.0000000000000000e-10"));
    assert!(manifest.contains("status = ok"));
}

#[test]
fn exponent_below_one_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(d.path(), "[coefficients]\nfamily = p_laplace\np = 0.5\n");
    let o = run(&["solve-elliptic"], &cfg, &d.path().join("out"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1, inf)"));
}

#[test]
fn manufactured_p3_solution_is_reproduced() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["solve-elliptic"], &configs().join("manufactured_p3.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(number(&d.path().join("report.txt"), "error_l2") < 1e-6);
}

#[test]
fn constant_neumann_state_stays_constant() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["solve-parabolic"], &configs().join("neumann_constant.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for v in line.split(',').skip(2) {
            assert!((v.parse::<f64>().unwrap() - 0.75).abs() < 1e-12, "{v}");
        }
    }
}

#[test]
fn fourier_robin_benchmark_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["solve-parabolic"], &configs().join("fourier_robin.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(number(&d.path().join("report.txt"), "reference_max_error") < 1e-3);
}

#[test]
fn wentzell_run_conserves_domain_plus_boundary_integral() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["solve-parabolic"], &configs().join("wentzell.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = d.path().join("report.txt");
    assert!(number(&r, "conserved_drift") < 1e-9);
    assert!(value(&r, "conserved_quantity").contains("boundary"));
}

#[test]
fn wentzell_needs_beta() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(d.path(), "[coefficients]\np = 3\n[boundary]\nmode = wentzell\n[evolution]\ninitial = x\n");
    let o = run(&["solve-parabolic"], &cfg, &d.path().join("out"));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn coefficient_checks() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["check-coefficients"], &configs().join("check_p3.ini"), &d.path().join("p3"));
    assert_eq!(code(&o), 0);
    assert_eq!(value(&d.path().join("p3/check_report.txt"), "result"), "pass");

    let o = run(&["check-coefficients"], &configs().join("check_rotation.ini"), &d.path().join("rot"));
    assert_eq!(code(&o), 3);
    let r = d.path().join("rot/check_report.txt");
    assert!(value(&r, "monotonicity.flux").starts_with("boundary case: >= 0 with equality"));
    assert!(value(&r, "structure.coercivity").starts_with("fail"));

    let o = run(&["check-coefficients"], &configs().join("check_negative_b0.ini"), &d.path().join("neg"));
    assert_eq!(code(&o), 3);
    let r = d.path().join("neg/check_report.txt");
    assert!(value(&r, "monotonicity.reaction").starts_with("fail"));
    assert!(value(&r, "monotonicity.reaction").contains("x=("));
    assert!(value(&r, "parameters").contains("negative at ("));
}

#[test]
fn crandall_liggett_study_differences_decrease() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["study"], &configs().join("study_crandall_liggett.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("study.csv")).unwrap();
    let diffs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert_eq!(diffs.len(), 3);
    assert!(diffs.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn hoelder_study_is_bounded() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["study"], &configs().join("study_hoelder.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("study.csv")).unwrap();
    assert!(csv.starts_with("level,h,vertices,hoelder,observed_order\n"));
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(value(&d.path().join("study_summary.txt"), "bounded"), "true");
}

#[test]
fn semigroup_study_defect_decreases() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["study"], &configs().join("study_semigroup.ini"), d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value(&d.path().join("study_summary.txt"), "defect_decreasing"), "true");
}

#[test]
fn empty_study_lists_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(d.path(), "[coefficients]\np = 3\n[evolution]\ninitial = x\n[study]\nkind = crandall_liggett\nn_list =\n");
    assert_eq!(code(&run(&["study"], &cfg, &d.path().join("a"))), 1);
    let cfg = inline(d.path(), "[coefficients]\np = 3\n[study]\nkind = refinement\nlevels =\n");
    assert_eq!(code(&run(&["study"], &cfg, &d.path().join("b"))), 1);
    let cfg = inline(d.path(), "[coefficients]\np = 3\n[study]\nkind = refinement\nlevels = 1\n");
    assert_eq!(code(&run(&["study"], &cfg, &d.path().join("c"))), 1);
}

#[test]
fn solver_failure_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(
        d.path(),
        "[mesh]\nn = 6\n[coefficients]\np = 4\nomega = 1\nsource = 10\n[solver]\nstrategy = picard\nmax_picard = 1\n",
    );
    let o = run(&["solve-elliptic"], &cfg, &d.path().join("out"));
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(d.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("status = solver failure"));
}

#[test]
fn unknown_keys_and_missing_config_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(d.path(), "[mesh]\nsize = 4\n");
    assert_eq!(code(&run(&["export-mesh"], &cfg, &d.path().join("out"))), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_quasilin")).arg("export-mesh").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(
        d.path(),
        "[coefficients]\np = 3\nomega = 1\n[study]\nkind = refinement\nfamily = unit_square\nbase = 2\nlevels = 3\nquantity = contraction\n",
    );
    let read = |dir: &str| fs::read(d.path().join(dir).join("study.csv")).unwrap();
    for (dir, seed, threads) in [("a", "7", "1"), ("b", "7", "3"), ("c", "8", "2")] {
        let o = run(&["study", "--seed", seed, "--threads", threads], &cfg, &d.path().join(dir));
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn exported_mesh_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let cfg = inline(d.path(), "[mesh]\ngenerator = l_shape\nn = 2\nrefine = 1\n");
    let o = run(&["export-mesh"], &cfg, &d.path().join("out"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read(d.path().join("out/mesh.txt")).unwrap();
    let mesh = Mesh::<f64>::read_text(&text[..]).unwrap();
    assert_eq!(mesh.num_triangles(), 4 * Mesh::<f64>::l_shape(2).unwrap().num_triangles());
    assert!(fs::read_to_string(d.path().join("out/mesh.vtk")).unwrap().starts_with("# vtk DataFile Version 3.0"));

    // the exported file is accepted as a mesh source
    let cfg = inline(d.path(), "[mesh]\ngenerator = file\nfile = out/mesh.txt\n[coefficients]\np = 2\nomega = 1\nsource = 1\n");
    let o = run(&["solve-elliptic"], &cfg, &d.path().join("solve"));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
