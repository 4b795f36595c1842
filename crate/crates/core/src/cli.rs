//! Command-line front end: `simulate` and `diagnose` read a TOML run config,
//! `fit` estimates a system from CSV files.
//!
//! Data layout for `fit` (headerless, comma-separated):
//! `y.csv` is N rows × T columns; `x_1.csv` … `x_N.csv` are T rows × K columns.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{
    coverage_experiment, coverage_rows, incoherence, incoherence_rows, rate_experiment, rate_rows, rate_slope,
    recovery_experiment, recovery_rows, write_rows_csv, CoverageExperimentSpec, CoverageResult, ExperimentRow,
    Incoherence, RateCell, RateExperimentSpec, RecoveryExperimentSpec, RecoverySummary, ReplicationSettings,
    DEFAULT_STRONG_THRESHOLD,
};
use crate::dgp::{build_precision, DesignKind, PrecisionDesign};
use crate::error::{Error, Result};
use crate::glasso::GlassoConfig;
use crate::harness::{render_table, run_sweep_with_threads, write_raw_log, Cell, McReport, SweepSpec, TableFormat};
use crate::linalg::{cholesky, Matrix};
use crate::modelselect::{fit_fglasso_cv, CvFit, CvPlan, FoldScheme};
use crate::sur::{
    fit_fgls, fit_gls, fit_ols, gls_standard_errors, residual_covariance, Estimator, FitResult, SurDataset,
};

pub const SPEC_VERSION: i64 = 1;

// ---------------------------------------------------------------------------
// schema

#[derive(Debug)]
enum Ty {
    Int { min: i64 },
    Float { min: f64, max: f64 },
    Bool,
    Str(&'static [&'static str]),
    Array(&'static Ty, usize),
    Table(&'static [Field]),
}

#[derive(Debug)]
struct Field {
    name: &'static str,
    ty: Ty,
    required: bool,
}

const fn req(name: &'static str, ty: Ty) -> Field {
    Field { name, ty, required: true }
}

const fn opt(name: &'static str, ty: Ty) -> Field {
    Field { name, ty, required: false }
}

const DESIGNS: &[&str] = &["band", "lattice4nn", "ar1", "dense"];
const ESTIMATORS: &[&str] = &["ols", "gls", "fgls", "fglasso"];
const POS: Ty = Ty::Int { min: 1 };
const SEED: Ty = Ty::Int { min: 0 };

const CV_FIELDS: &[Field] = &[
    opt("n_folds", Ty::Int { min: 2 }),
    opt("n_lambdas", Ty::Int { min: 2 }),
    opt("scheme", Ty::Str(&["random", "contiguous"])),
];
const GLASSO_FIELDS: &[Field] = &[
    opt("max_sweeps", POS),
    opt("tol", Ty::Float { min: f64::MIN_POSITIVE, max: f64::INFINITY }),
    opt("inner_max_iter", POS),
    opt("inner_tol", Ty::Float { min: f64::MIN_POSITIVE, max: f64::INFINITY }),
];
const OUTPUT_FIELDS: &[Field] = &[opt("dir", Ty::Str(&[])), opt("wall_time", Ty::Bool)];
const CELL_FIELDS: &[Field] = &[req("N", POS), req("T", Ty::Int { min: 2 })];
const SWEEP_FIELDS: &[Field] = &[
    req("designs", Ty::Array(&Ty::Str(DESIGNS), 1)),
    req("cells", Ty::Array(&Ty::Table(CELL_FIELDS), 1)),
    req("n_reps", POS),
    req("estimators", Ty::Array(&Ty::Str(ESTIMATORS), 1)),
];

const SIMULATE_SCHEMA: &[Field] = &[
    req("spec_version", Ty::Int { min: SPEC_VERSION }),
    opt("seed", SEED),
    opt("threads", POS),
    opt("output", Ty::Table(OUTPUT_FIELDS)),
    req("sweep", Ty::Table(SWEEP_FIELDS)),
    opt("cv", Ty::Table(CV_FIELDS)),
    opt("glasso", Ty::Table(GLASSO_FIELDS)),
];

const INCOHERENCE_FIELDS: &[Field] = &[req("design", Ty::Str(DESIGNS)), req("N", POS)];
const RATE_FIELDS: &[Field] = &[
    req("design", Ty::Str(DESIGNS)),
    req("sizes", Ty::Array(&POS, 1)),
    req("t_grid", Ty::Array(&Ty::Int { min: 2 }, 3)),
    req("n_reps", POS),
];
const COVERAGE_FIELDS: &[Field] = &[
    req("design", Ty::Str(DESIGNS)),
    req("N", POS),
    req("T", Ty::Int { min: 2 }),
    req("n_reps", Ty::Int { min: 100 }),
    opt("nominal_level", Ty::Float { min: 1e-9, max: 1.0 - 1e-9 }),
];
const RECOVERY_FIELDS: &[Field] = &[
    req("design", Ty::Str(DESIGNS)),
    req("N", POS),
    req("T", Ty::Int { min: 2 }),
    req("n_reps", POS),
    opt("strong_threshold", Ty::Float { min: 0.0, max: f64::INFINITY }),
];

const DIAGNOSE_SCHEMA: &[Field] = &[
    req("spec_version", Ty::Int { min: SPEC_VERSION }),
    opt("seed", SEED),
    opt("threads", POS),
    opt("output", Ty::Table(OUTPUT_FIELDS)),
    opt("cv", Ty::Table(CV_FIELDS)),
    opt("glasso", Ty::Table(GLASSO_FIELDS)),
    opt("incoherence", Ty::Array(&Ty::Table(INCOHERENCE_FIELDS), 1)),
    opt("rate", Ty::Table(RATE_FIELDS)),
    opt("coverage", Ty::Table(COVERAGE_FIELDS)),
    opt("recovery", Ty::Table(RECOVERY_FIELDS)),
];

fn check(path: &str, value: &toml::Value, ty: &Ty, problems: &mut Vec<String>) {
    use toml::Value as V;
    match (ty, value) {
        (Ty::Int { min }, V::Integer(i)) => {
            if i < min {
                problems.push(format!("{path}: must be >= {min}, got {i}"));
            }
        }
        (Ty::Float { min, max }, V::Float(_) | V::Integer(_)) => {
            let x = value.as_float().unwrap_or_else(|| value.as_integer().unwrap_or_default() as f64);
            if !(x >= *min && x <= *max) {
                problems.push(format!("{path}: must be in [{min}, {max}], got {x}"));
            }
        }
        (Ty::Bool, V::Boolean(_)) => {}
        (Ty::Str(choices), V::String(s)) => {
            if !choices.is_empty() && !choices.contains(&s.as_str()) {
                problems.push(format!("{path}: {s:?} is not one of {}", choices.join(", ")));
            }
        }
        (Ty::Array(inner, min_len), V::Array(items)) => {
            if items.len() < *min_len {
                problems.push(format!("{path}: needs at least {min_len} entries, got {}", items.len()));
            }
            for (k, item) in items.iter().enumerate() {
                check(&format!("{path}[{k}]"), item, inner, problems);
            }
        }
        (Ty::Table(fields), V::Table(t)) => check_table(path, t, fields, problems),
        (ty, v) => problems.push(format!("{path}: expected {}, got {}", describe(ty), v.type_str())),
    }
}

fn describe(ty: &Ty) -> &'static str {
    match ty {
        Ty::Int { .. } => "integer",
        Ty::Float { .. } => "number",
        Ty::Bool => "boolean",
        Ty::Str(_) => "string",
        Ty::Array(..) => "array",
        Ty::Table(_) => "table",
    }
}

fn check_table(path: &str, table: &toml::Table, fields: &[Field], problems: &mut Vec<String>) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    for key in table.keys() {
        if !fields.iter().any(|f| f.name == key) {
            problems.push(format!("{}: unknown key", join(key)));
        }
    }
    for f in fields {
        match table.get(f.name) {
            Some(v) => check(&join(f.name), v, &f.ty, problems),
            None if f.required => problems.push(format!("{}: missing required key", join(f.name))),
            None => {}
        }
    }
}

/// Parses a config and checks it against a schema, collecting every violation.
fn load_config(path: &Path, schema: &[Field]) -> Result<toml::Table> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| Error::ConfigInvalid(vec![format!("syntax: {}", e.message())]))?;
    let mut problems = Vec::new();
    check_table("", &table, schema, &mut problems);
    if let Some(v) = table.get("spec_version").and_then(|v| v.as_integer()) {
        if v != SPEC_VERSION {
            problems.push(format!("spec_version: unsupported version {v}, expected {SPEC_VERSION}"));
        }
    }
    if problems.is_empty() {
        Ok(table)
    } else {
        Err(Error::ConfigInvalid(problems))
    }
}

// ---------------------------------------------------------------------------
// typed configs (deserialized only after the schema passes)

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    wall_time: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    designs: Vec<DesignKind>,
    cells: Vec<Cell>,
    n_reps: usize,
    estimators: Vec<Estimator>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[allow(dead_code)]
    spec_version: i64,
    #[serde(default)]
    seed: u64,
    threads: Option<usize>,
    #[serde(default)]
    output: OutputSection,
    sweep: SweepSection,
    #[serde(default)]
    cv: CvPlan,
    #[serde(default)]
    glasso: GlassoConfig,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IncoherenceEntry {
    design: DesignKind,
    #[serde(rename = "N")]
    n: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateSection {
    design: DesignKind,
    sizes: Vec<usize>,
    t_grid: Vec<usize>,
    n_reps: usize,
}

fn default_level() -> f64 {
    0.95
}

fn default_strong() -> f64 {
    DEFAULT_STRONG_THRESHOLD
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageSection {
    design: DesignKind,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    n_reps: usize,
    #[serde(default = "default_level")]
    nominal_level: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverySection {
    design: DesignKind,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    n_reps: usize,
    #[serde(default = "default_strong")]
    strong_threshold: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnoseConfig {
    #[allow(dead_code)]
    spec_version: i64,
    #[serde(default)]
    seed: u64,
    threads: Option<usize>,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    cv: CvPlan,
    #[serde(default)]
    glasso: GlassoConfig,
    incoherence: Option<Vec<IncoherenceEntry>>,
    rate: Option<RateSection>,
    coverage: Option<CoverageSection>,
    recovery: Option<RecoverySection>,
}

fn typed<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
    T::deserialize(toml::Value::Table(table)).map_err(|e| Error::ConfigInvalid(vec![e.message().to_string()]))
}

/// Command-line overrides shared by the config-driven commands.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// Master seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn output_dir(config_dir: Option<&PathBuf>, overrides: &Overrides) -> PathBuf {
    overrides.out.clone().or_else(|| config_dir.cloned()).unwrap_or_else(|| PathBuf::from("."))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(Error::from)
}

/// What a command produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CommandOutcome {
    pub outputs: Vec<PathBuf>,
    /// Per-item failures recorded without aborting the run.
    pub error_count: usize,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.error_count == 0 {
            0
        } else {
            1
        }
    }
}

// ---------------------------------------------------------------------------
// simulate

/// A validated sweep config with overrides applied.
#[derive(Clone, Debug)]
pub struct SimulatePlan {
    pub spec: SweepSpec,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub wall_time: bool,
}

pub fn load_simulate_plan(config_path: &Path, overrides: &Overrides) -> Result<SimulatePlan> {
    let cfg: SimulateConfig = typed(load_config(config_path, SIMULATE_SCHEMA)?)?;
    cfg.glasso.validate().map_err(|e| Error::ConfigInvalid(vec![format!("glasso: {e}")]))?;
    let spec = SweepSpec {
        designs: cfg.sweep.designs,
        cells: cfg.sweep.cells,
        n_reps: cfg.sweep.n_reps,
        estimators: cfg.sweep.estimators,
        cv: cfg.cv,
        glasso: cfg.glasso,
        seed: overrides.seed.unwrap_or(cfg.seed),
    };
    spec.validate()?;
    Ok(SimulatePlan {
        spec,
        threads: overrides.threads.or(cfg.threads),
        out_dir: output_dir(cfg.output.dir.as_ref(), overrides),
        wall_time: cfg.output.wall_time,
    })
}

/// Runs a Monte-Carlo sweep and writes raw_log.csv and report.{csv,json,txt}.
/// Wall times are logged only with `output.wall_time = true`, so reruns are byte-identical by default.
pub fn cmd_simulate(config_path: &Path, overrides: &Overrides) -> Result<CommandOutcome> {
    let plan = load_simulate_plan(config_path, overrides)?;
    let dir = plan.out_dir;
    fs::create_dir_all(&dir)?;

    let out = run_sweep_with_threads(&plan.spec, plan.threads.unwrap_or_else(rayon::current_num_threads))?;
    let mut raw = out.raw;
    if !plan.wall_time {
        raw.iter_mut().for_each(|r| r.wall_ms = f64::NAN);
    }
    let mut outcome = CommandOutcome { outputs: Vec::new(), error_count: out.report.errors.len() };
    let raw_path = dir.join("raw_log.csv");
    let mut buf = Vec::new();
    write_raw_log(&raw, &mut buf)?;
    write_file(&raw_path, &buf)?;
    outcome.outputs.push(raw_path);
    for (name, format) in [("report.csv", TableFormat::Csv), ("report.json", TableFormat::Json), ("report.txt", TableFormat::Text)]
    {
        let path = dir.join(name);
        write_file(&path, render_table(&out.report, format)?.as_bytes())?;
        outcome.outputs.push(path);
    }
    Ok(outcome)
}

/// Reads a report written by `simulate`.
pub fn read_report(path: &Path) -> Result<McReport> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

// ---------------------------------------------------------------------------
// fit

#[derive(Clone, Debug, Args)]
pub struct FitOptions {
    /// Estimator to apply: ols, gls, fgls or fglasso.
    #[arg(long, default_value = "fglasso")]
    pub estimator: Estimator,
    /// Fixed graphical-lasso penalty; cross-validated when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Known precision matrix (N×N CSV), required by --estimator gls.
    #[arg(long)]
    pub omega: Option<PathBuf>,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Cross-validation grid size.
    #[arg(long, default_value_t = 20)]
    pub n_lambdas: usize,
    /// Fold layout: random or contiguous.
    #[arg(long, default_value = "random")]
    pub cv_scheme: FoldSchemeArg,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (defaults to the data directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for cross-validation.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Fglasso,
            lambda: None,
            omega: None,
            folds: 5,
            n_lambdas: 20,
            cv_scheme: FoldSchemeArg::Random,
            seed: 0,
            out: None,
            threads: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FoldSchemeArg {
    Random,
    Contiguous,
}

impl From<FoldSchemeArg> for FoldScheme {
    fn from(a: FoldSchemeArg) -> Self {
        match a {
            FoldSchemeArg::Random => FoldScheme::Random,
            FoldSchemeArg::Contiguous => FoldScheme::Contiguous,
        }
    }
}

/// Writes `y.csv` and `x_1.csv` … `x_N.csv` in the layout `fit` reads.
pub fn export_dataset(data: &SurDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    data.y().write_csv_file(&dir.join("y.csv"))?;
    for (i, x) in data.x_blocks().iter().enumerate() {
        x.write_csv_file(&dir.join(format!("x_{}.csv", i + 1)))?;
    }
    Ok(())
}

/// Reads a dataset, checking every file's shape before returning.
pub fn import_dataset(dir: &Path) -> Result<SurDataset> {
    let y_path = dir.join("y.csv");
    let y = Matrix::read_csv_file(&y_path)?;
    let (n, t) = y.shape();
    let mut blocks = Vec::with_capacity(n);
    let mut k = None;
    for i in 1..=n {
        let path = dir.join(format!("x_{i}.csv"));
        let x = Matrix::read_csv_file(&path)?;
        if x.rows() != t {
            return Err(Error::ShapeMismatch {
                file: path,
                detail: format!("expected {t} rows (the column count of y.csv), found {}", x.rows()),
            });
        }
        match k {
            None => k = Some(x.cols()),
            Some(k0) if k0 != x.cols() => {
                return Err(Error::ShapeMismatch {
                    file: path,
                    detail: format!("expected {k0} columns (as in x_1.csv), found {}", x.cols()),
                })
            }
            _ => {}
        }
        blocks.push(x);
    }
    let extra = dir.join(format!("x_{}.csv", n + 1));
    if extra.exists() {
        return Err(Error::ShapeMismatch {
            file: extra,
            detail: format!("y.csv has {n} rows, so only x_1.csv … x_{n}.csv are expected"),
        });
    }
    SurDataset::new(blocks, y)
}

fn remediation(err: &Error, estimator: Estimator, data: Option<&SurDataset>) -> Option<String> {
    let short = data.map(|d| d.n_periods() < d.n_equations()).unwrap_or(false);
    match err {
        Error::SingularSigmaHat if short => Some("T < N: use --estimator fglasso".into()),
        Error::SingularSigmaHat => Some("the residual covariance is singular: use --estimator fglasso".into()),
        Error::RankDeficientRegressors { equation } => {
            Some(format!("drop collinear columns from x_{}.csv", equation + 1))
        }
        Error::RankDeficientTrainingSplit { .. } => {
            Some("use fewer --folds or --cv-scheme random, or pass a fixed --lambda".into())
        }
        Error::NoValidLambda => Some("pass a fixed --lambda".into()),
        Error::InvalidArgument(m) if estimator == Estimator::Gls && m.contains("--omega") => {
            Some("write the known precision matrix to a CSV file and pass --omega".into())
        }
        _ => None,
    }
}

/// A failed command with an optional hint on how to fix it.
#[derive(Debug)]
pub struct CommandError {
    pub error: Error,
    pub hint: Option<String>,
}

impl CommandError {
    pub fn to_json(&self) -> serde_json::Value {
        let violations = match &self.error {
            Error::ConfigInvalid(v) => v.clone(),
            _ => Vec::new(),
        };
        json!({
            "error": self.error.kind(),
            "message": self.error.to_string(),
            "violations": violations,
            "hint": self.hint,
        })
    }
}

impl From<Error> for CommandError {
    fn from(error: Error) -> Self {
        Self { error, hint: None }
    }
}

fn labelled_column(values: &[f64], k: usize, header: &str) -> String {
    let mut s = format!("equation,coefficient,{header}\n");
    for (idx, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", idx / k + 1, idx % k + 1, v));
    }
    s
}

/// Fits one estimator to the CSV dataset in `data_dir` and writes beta.csv,
/// omega.csv, se.csv and summary.json.
pub fn cmd_fit(data_dir: &Path, options: &FitOptions) -> std::result::Result<CommandOutcome, CommandError> {
    let data = import_dataset(data_dir)?;
    let hint = |e: Error| {
        let hint = remediation(&e, options.estimator, Some(&data));
        CommandError { error: e, hint }
    };
    let (fit, omega_used, cv) = with_pool(options.threads, || fit_with_options(&data, options)).map_err(hint)?;
    let se = gls_standard_errors(&data, &omega_used).map_err(hint)?;

    let dir = options.out.clone().unwrap_or_else(|| data_dir.to_path_buf());
    fs::create_dir_all(&dir).map_err(Error::from)?;
    let k = data.k_per_equation();
    let mut outcome = CommandOutcome::default();
    let beta_path = dir.join("beta.csv");
    write_file(&beta_path, labelled_column(&fit.beta_hat, k, "estimate").as_bytes())?;
    let se_path = dir.join("se.csv");
    write_file(&se_path, labelled_column(&se, k, "se").as_bytes())?;
    let omega_path = dir.join("omega.csv");
    omega_used.write_csv_file(&omega_path)?;

    let summary = json!({
        "estimator": fit.estimator,
        "N": data.n_equations(),
        "T": data.n_periods(),
        "K": k,
        "lambda": fit.solver_meta.as_ref().map(|m| m.lambda),
        "solver": fit.solver_meta,
        "cv": cv.as_ref().map(|c| json!({
            "n_folds": options.folds,
            "scheme": FoldScheme::from(options.cv_scheme),
            "seed": options.seed,
            "best_lambda": c.cv.best_lambda,
            "mse_by_lambda": c.cv.mse_by_lambda,
            "excluded": c.cv.excluded,
        })),
        "omega_note": omega_note(options.estimator),
    });
    let summary_path = dir.join("summary.json");
    write_file(&summary_path, (serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n").as_bytes())?;
    outcome.outputs = vec![beta_path, omega_path, se_path, summary_path];
    Ok(outcome)
}

fn omega_note(estimator: Estimator) -> &'static str {
    match estimator {
        Estimator::Ols => "diag(1/sigma_ii) from OLS residuals; OLS equals GLS at any diagonal omega",
        Estimator::Gls => "the supplied precision matrix",
        Estimator::Fgls => "inverse of the OLS residual covariance",
        Estimator::Fglasso => "graphical-lasso precision estimate",
    }
}

/// Runs the requested estimator; returns the fit, the Ω its standard errors use, and the CV trace.
pub fn fit_with_options(data: &SurDataset, options: &FitOptions) -> Result<(FitResult, Matrix, Option<CvFit>)> {
    data.check_rank()?;
    match options.estimator {
        Estimator::Ols => {
            let fit = fit_ols(data)?;
            let s = residual_covariance(&fit);
            if let Some(i) = s.diag().iter().position(|&v| !(v > 0.0)) {
                return Err(Error::InvalidArgument(format!("equation {} is fitted exactly; no standard errors", i + 1)));
            }
            let omega = Matrix::from_diag(&s.diag().iter().map(|v| 1.0 / v).collect::<Vec<_>>());
            Ok((fit, omega, None))
        }
        Estimator::Gls => {
            let path = options
                .omega
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--estimator gls needs --omega <file>".into()))?;
            let omega = Matrix::read_csv_file(path)?;
            if omega.shape() != (data.n_equations(), data.n_equations()) {
                return Err(Error::ShapeMismatch {
                    file: path.clone(),
                    detail: format!("expected {n}×{n}, found {:?}", omega.shape(), n = data.n_equations()),
                });
            }
            cholesky(&omega)?;
            let fit = fit_gls(data, &omega)?;
            Ok((fit, omega, None))
        }
        Estimator::Fgls => {
            let fit = fit_fgls(data)?;
            let omega = fit.omega_used.clone().expect("FGLS records its omega");
            Ok((fit, omega, None))
        }
        Estimator::Fglasso => match options.lambda {
            Some(lambda) => {
                let fit = crate::sur::fit_fglasso(data, &GlassoConfig::with_lambda(lambda))?;
                let omega = fit.omega_used.clone().expect("FGLasso records its omega");
                Ok((fit, omega, None))
            }
            None => {
                let plan = CvPlan { n_folds: options.folds, n_lambdas: options.n_lambdas, scheme: options.cv_scheme.into() };
                let cv = fit_fglasso_cv(data, &plan, options.seed, &GlassoConfig::default())?;
                let omega = cv.glasso.omega_hat.clone();
                Ok((cv.fit.clone(), omega, Some(cv)))
            }
        },
    }
}

// ---------------------------------------------------------------------------
// diagnose

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnoseResults {
    pub incoherence: Vec<IncoherenceResult>,
    pub rate: Option<RateResult>,
    pub coverage: Option<CoverageResult>,
    pub recovery: Option<RecoverySummary>,
    pub errors: Vec<DiagnoseError>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IncoherenceResult {
    pub design: DesignKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(flatten)]
    pub values: Incoherence,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateResult {
    pub cells: Vec<RateCell>,
    /// Slope of log mean ‖Ω̂ − Ω‖_max on log T, per N.
    pub slopes: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnoseError {
    pub experiment: String,
    pub kind: String,
    pub message: String,
}

fn record<T>(errors: &mut Vec<DiagnoseError>, experiment: &str, r: Result<T>) -> Option<T> {
    r.map_err(|e| {
        errors.push(DiagnoseError { experiment: experiment.into(), kind: e.kind().into(), message: e.to_string() })
    })
    .ok()
}

/// Runs the experiments listed in a diagnose config and writes
/// diagnostics.csv (long format) and diagnostics.json.
pub fn cmd_diagnose(config_path: &Path, overrides: &Overrides) -> Result<(CommandOutcome, DiagnoseResults)> {
    let cfg: DiagnoseConfig = typed(load_config(config_path, DIAGNOSE_SCHEMA)?)?;
    cfg.glasso.validate().map_err(|e| Error::ConfigInvalid(vec![format!("glasso: {e}")]))?;
    let seed = overrides.seed.unwrap_or(cfg.seed);
    let threads = overrides.threads.or(cfg.threads);
    let dir = output_dir(cfg.output.dir.as_ref(), overrides);
    fs::create_dir_all(&dir)?;
    let settings = |n_reps| ReplicationSettings { n_reps, seed, cv: cfg.cv, glasso: cfg.glasso.clone() };

    let results = with_pool(threads, || {
        let mut res = DiagnoseResults::default();
        for entry in cfg.incoherence.iter().flatten() {
            let r = build_precision(&PrecisionDesign::new(entry.design, entry.n)).and_then(|o| incoherence(&o));
            if let Some(values) = record(&mut res.errors, "incoherence", r) {
                res.incoherence.push(IncoherenceResult { design: entry.design, n: entry.n, values });
            }
        }
        if let Some(r) = &cfg.rate {
            let spec = RateExperimentSpec {
                design: r.design,
                sizes: r.sizes.clone(),
                t_grid: r.t_grid.clone(),
                settings: settings(r.n_reps),
            };
            if let Some(cells) = record(&mut res.errors, "rate", rate_experiment(&spec)) {
                let slopes = r.sizes.iter().filter_map(|&n| rate_slope(&cells, n).map(|s| (n, s))).collect();
                res.rate = Some(RateResult { cells, slopes });
            }
        }
        if let Some(c) = &cfg.coverage {
            let spec = CoverageExperimentSpec {
                design: PrecisionDesign::new(c.design, c.n),
                n_periods: c.t,
                nominal_level: c.nominal_level,
                settings: settings(c.n_reps),
            };
            res.coverage = record(&mut res.errors, "coverage", coverage_experiment(&spec));
        }
        if let Some(r) = &cfg.recovery {
            let spec = RecoveryExperimentSpec {
                design: PrecisionDesign::new(r.design, r.n),
                n_periods: r.t,
                strong_threshold: r.strong_threshold,
                settings: settings(r.n_reps),
            };
            res.recovery = record(&mut res.errors, "recovery", recovery_experiment(&spec));
        }
        Ok(res)
    })?;

    let mut rows: Vec<ExperimentRow> = Vec::new();
    for inc in &results.incoherence {
        rows.extend(incoherence_rows(inc.design, inc.n, &inc.values));
    }
    if let Some(r) = &results.rate {
        rows.extend(rate_rows(&r.cells));
    }
    if let Some(c) = &results.coverage {
        rows.extend(coverage_rows(c));
    }
    if let Some(r) = &results.recovery {
        rows.extend(recovery_rows(r));
    }
    let csv_path = dir.join("diagnostics.csv");
    let mut buf = Vec::new();
    write_rows_csv(&rows, &mut buf)?;
    write_file(&csv_path, &buf)?;
    let json_path = dir.join("diagnostics.json");
    write_file(&json_path, (serde_json::to_string_pretty(&results)? + "\n").as_bytes())?;
    let outcome = CommandOutcome { outputs: vec![csv_path, json_path], error_count: results.errors.len() };
    Ok((outcome, results))
}

// ---------------------------------------------------------------------------
// argument parsing

#[derive(Debug, Parser)]
#[command(name = "fglasso", version, about = "Feasible graphical-lasso GLS for seemingly unrelated regressions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo sweep described by a TOML config.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit an estimator to y.csv and x_1.csv … x_N.csv in a directory.
    Fit {
        data_dir: PathBuf,
        #[command(flatten)]
        options: FitOptions,
    },
    /// Run diagnostics experiments described by a TOML config.
    Diagnose {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Parses arguments, runs the command, and returns the process exit code.
/// Failures print a JSON error report on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result: std::result::Result<CommandOutcome, CommandError> = match &cli.command {
        Command::Simulate { config, overrides } => cmd_simulate(config, overrides).map_err(CommandError::from),
        Command::Fit { data_dir, options } => cmd_fit(data_dir, options),
        Command::Diagnose { config, overrides } => cmd_diagnose(config, overrides)
            .map(|(outcome, res)| {
                for inc in &res.incoherence {
                    println!(
                        "incoherence {} N={}: incoherence={} alpha={} kappa_gamma={} kappa_sigma={}",
                        inc.design,
                        inc.n,
                        inc.values.incoherence,
                        inc.values.alpha,
                        inc.values.kappa_gamma,
                        inc.values.kappa_sigma
                    );
                }
                if let Some(c) = &res.coverage {
                    println!(
                        "coverage {} N={} T={}: true_omega={} plugin={}",
                        c.design, c.n, c.t, c.coverage_true_omega, c.coverage_plugin
                    );
                }
                outcome
            })
            .map_err(CommandError::from),
    };
    match result {
        Ok(outcome) => {
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            if outcome.error_count > 0 {
                eprintln!("{}", json!({ "error": "RecordedErrors", "count": outcome.error_count }));
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}
