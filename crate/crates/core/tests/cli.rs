//! End-to-end tests of the command-line commands on temporary directories.

mod common;

use std::fs;
use std::path::Path;

use common::*;
use fglasso::cli::{self, cmd_diagnose, cmd_fit, cmd_simulate, export_dataset, fit_with_options, FitOptions, Overrides};
use fglasso::dgp::{simulate, DesignKind, PrecisionDesign, SimSpec};
use fglasso::error::Error;
use fglasso::sur::Estimator;
use tempfile::TempDir;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn out_to(dir: &Path) -> Overrides {
    Overrides { out: Some(dir.to_path_buf()), ..Overrides::default() }
}

fn read_beta(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("equation,coefficient,estimate"));
    lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

const MINIMAL: &str = r#"
spec_version = 1
seed = 3
[sweep]
designs = ["band"]
cells = [{ N = 10, T = 50 }]
n_reps = 2
estimators = ["ols"]
"#;

#[test]
fn minimal_config_gives_one_cell() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.toml", MINIMAL);
    let outcome = cmd_simulate(&cfg, &out_to(tmp.path())).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let report = cli::read_report(&tmp.path().join("report.json")).unwrap();
    assert_eq!(report.cells.len(), 1);
    assert_eq!(report.cells[0].stats(Estimator::Ols).unwrap().n_ok, 2);
    for f in ["raw_log.csv", "report.csv", "report.txt"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    let code = cli::run(["fglasso", "simulate", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn fgls_is_marked_undefined_when_n_exceeds_t() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        r#"
spec_version = 1
[sweep]
designs = ["band"]
cells = [{ N = 12, T = 8 }]
n_reps = 2
estimators = ["ols", "fgls", "fglasso"]
[cv]
n_folds = 2
n_lambdas = 5
"#,
    );
    let outcome = cmd_simulate(&cfg, &out_to(tmp.path())).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let report = cli::read_report(&tmp.path().join("report.json")).unwrap();
    let cell = &report.cells[0];
    assert!(cell.fgls_undefined);
    assert!(cell.stats(Estimator::Fgls).is_none_or(|s| s.n_ok == 0));
    assert_eq!(cell.stats(Estimator::Fglasso).unwrap().n_ok, 2);
}

#[test]
fn malformed_config_lists_every_violation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        r#"
spec_version = 1
threads = 0
colour = "blue"
[sweep]
designs = ["square"]
cells = [{ N = 5 }]
n_reps = 1
estimators = ["ols"]
"#,
    );
    match cmd_simulate(&cfg, &out_to(tmp.path())) {
        Err(Error::ConfigInvalid(v)) => {
            let all = v.join("\n");
            for needle in ["threads", "colour: unknown key", "sweep.designs[0]", "sweep.cells[0].T: missing"] {
                assert!(all.contains(needle), "{needle} not in\n{all}");
            }
            assert_eq!(v.len(), 4, "{all}");
        }
        other => panic!("expected ConfigInvalid, got {other:?}"),
    }
    assert_ne!(cli::run(["fglasso", "simulate", cfg.to_str().unwrap()]), 0);
    let syntax = write(tmp.path(), "syntax.toml", "spec_version = \n");
    assert!(matches!(cmd_simulate(&syntax, &Overrides::default()), Err(Error::ConfigInvalid(_))));
    assert!(matches!(
        cmd_simulate(&tmp.path().join("absent.toml"), &Overrides::default()),
        Err(Error::MissingFile(_))
    ));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        r#"
spec_version = 1
seed = 9
[sweep]
designs = ["band", "ar1"]
cells = [{ N = 6, T = 30 }]
n_reps = 3
estimators = ["ols", "gls", "fgls", "fglasso"]
[cv]
n_lambdas = 6
"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_simulate(&cfg, &out_to(&a)).unwrap();
    cmd_simulate(&cfg, &Overrides { out: Some(b.clone()), threads: Some(3), seed: None }).unwrap();
    for f in ["raw_log.csv", "report.csv", "report.json", "report.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = tmp.path().join("c");
    cmd_simulate(&cfg, &Overrides { out: Some(c.clone()), seed: Some(10), threads: None }).unwrap();
    assert_ne!(fs::read(a.join("report.json")).unwrap(), fs::read(c.join("report.json")).unwrap());

    let data_dir = tmp.path().join("data");
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 5), 40, 2)).unwrap();
    export_dataset(&sim.data, &data_dir).unwrap();
    let opts = |out: &Path| FitOptions { out: Some(out.to_path_buf()), n_lambdas: 6, ..FitOptions::default() };
    cmd_fit(&data_dir, &opts(&a)).unwrap();
    cmd_fit(&data_dir, &opts(&b)).unwrap();
    for f in ["beta.csv", "omega.csv", "se.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn export_then_fit_matches_in_memory() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 8), 60, 4)).unwrap();
    export_dataset(&sim.data, tmp.path()).unwrap();
    for estimator in [Estimator::Ols, Estimator::Fgls, Estimator::Fglasso] {
        let opts = FitOptions { estimator, seed: 17, ..FitOptions::default() };
        let out = tmp.path().join(estimator.key());
        cmd_fit(tmp.path(), &FitOptions { out: Some(out.clone()), ..opts.clone() }).unwrap();
        let (fit, _, _) = fit_with_options(&sim.data, &opts).unwrap();
        let got = read_beta(&out.join("beta.csv"));
        assert_eq!(got.len(), fit.beta_hat.len());
        for (a, b) in got.iter().zip(&fit.beta_hat) {
            assert_eq!(a.to_bits(), b.to_bits(), "{estimator}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fglasso/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["estimator"], "fglasso");
    assert_eq!(summary["cv"]["mse_by_lambda"].as_array().unwrap().len(), 20);
    assert!(summary["lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn ols_matches_independent_least_squares() {
    let tmp = TempDir::new().unwrap();
    let mut r = rng(21);
    let data = random_dataset(&mut r, 4, 3, 25);
    export_dataset(&data, tmp.path()).unwrap();
    cmd_fit(tmp.path(), &FitOptions { estimator: Estimator::Ols, ..FitOptions::default() }).unwrap();
    let got = read_beta(&tmp.path().join("beta.csv"));
    let mut want = Vec::new();
    for i in 0..4 {
        let x = data.x_block(i);
        let xtx = x.transpose().matmul(x).unwrap();
        want.extend(dense_solve(&xtx, &x.transpose().mul_vec(data.y().row(i)).unwrap()));
    }
    assert!(max_abs_diff(&got, &want) < 1e-8);
    let se = fs::read_to_string(tmp.path().join("se.csv")).unwrap();
    assert_eq!(se.lines().count(), 1 + 12);
}

#[test]
fn fgls_with_short_panel_fails_with_hint() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Band, 10), 6, 1)).unwrap();
    export_dataset(&sim.data, tmp.path()).unwrap();
    let err = cmd_fit(tmp.path(), &FitOptions { estimator: Estimator::Fgls, ..FitOptions::default() }).unwrap_err();
    assert!(matches!(err.error, Error::SingularSigmaHat));
    let json = err.to_json();
    assert_eq!(json["error"], "SingularSigmaHat");
    assert!(json["hint"].as_str().unwrap().contains("T < N: use --estimator fglasso"));
    let code = cli::run(["fglasso", "fit", tmp.path().to_str().unwrap(), "--estimator", "fgls"]);
    assert_ne!(code, 0);
    // the suggested remedy works
    let ok = FitOptions { folds: 2, n_lambdas: 5, ..FitOptions::default() };
    assert!(cmd_fit(tmp.path(), &ok).is_ok());
}

#[test]
fn shape_errors_name_the_file() {
    let tmp = TempDir::new().unwrap();
    let mut r = rng(3);
    let data = random_dataset(&mut r, 3, 2, 10);
    export_dataset(&data, tmp.path()).unwrap();
    fs::write(tmp.path().join("x_2.csv"), "1,2\n3,4\n").unwrap();
    let err = cmd_fit(tmp.path(), &FitOptions::default()).unwrap_err();
    match err.error {
        Error::ShapeMismatch { file, .. } => assert!(file.ends_with("x_2.csv")),
        e => panic!("expected ShapeMismatch, got {e:?}"),
    }
    fs::remove_file(tmp.path().join("x_3.csv")).unwrap();
    let err = cmd_fit(tmp.path(), &FitOptions::default()).unwrap_err();
    assert!(matches!(err.error, Error::ShapeMismatch { .. } | Error::MissingFile(_)));
    let err = cmd_fit(&tmp.path().join("nowhere"), &FitOptions::default()).unwrap_err();
    assert!(matches!(err.error, Error::MissingFile(_)));
}

#[test]
fn gls_needs_an_omega_file() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(&SimSpec::new(PrecisionDesign::new(DesignKind::Ar1, 4), 30, 1)).unwrap();
    export_dataset(&sim.data, tmp.path()).unwrap();
    let err = cmd_fit(tmp.path(), &FitOptions { estimator: Estimator::Gls, ..FitOptions::default() }).unwrap_err();
    assert!(err.hint.unwrap().contains("--omega"));
    let omega_path = tmp.path().join("true_omega.csv");
    sim.true_omega.write_csv_file(&omega_path).unwrap();
    let opts = FitOptions { estimator: Estimator::Gls, omega: Some(omega_path), ..FitOptions::default() };
    cmd_fit(tmp.path(), &opts).unwrap();
    let want = fglasso::sur::fit_gls(&sim.data, &sim.true_omega).unwrap().beta_hat;
    assert_eq!(read_beta(&tmp.path().join("beta.csv")), want);
}

#[test]
fn diagnose_emits_scalars_table_and_coverage() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "diag.toml",
        r#"
spec_version = 1
seed = 5
[[incoherence]]
design = "band"
N = 5
[rate]
design = "band"
sizes = [5]
t_grid = [50, 200, 800]
n_reps = 4
[coverage]
design = "band"
N = 4
T = 100
n_reps = 100
"#,
    );
    let (outcome, res) = cmd_diagnose(&cfg, &out_to(tmp.path())).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let oracle = fglasso::diagnostics::incoherence(
        &fglasso::dgp::build_precision(&PrecisionDesign::new(DesignKind::Band, 5)).unwrap(),
    )
    .unwrap();
    assert_eq!(res.incoherence[0].values, oracle);
    let rate = res.rate.unwrap();
    assert!(rate.cells.windows(2).all(|w| w[1].omega_error_mean < w[0].omega_error_mean));
    let cov = res.coverage.unwrap();
    assert!((0.0..=1.0).contains(&cov.coverage_true_omega) && (0.0..=1.0).contains(&cov.coverage_plugin));
    let csv = fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("design,N,T,metric,mean,sd,n_reps\n"));
    for metric in ["incoherence", "omega_max_error", "coverage_true_omega", "coverage_plugin"] {
        assert!(csv.contains(metric), "{metric}");
    }
    let first = fs::read(tmp.path().join("diagnostics.json")).unwrap();
    cmd_diagnose(&cfg, &out_to(tmp.path())).unwrap();
    assert_eq!(first, fs::read(tmp.path().join("diagnostics.json")).unwrap());
}
