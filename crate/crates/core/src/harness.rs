//! Monte-Carlo sweeps over (design, N, T) comparing OLS, GLS, FGLS and
//! FGLasso, with table-style aggregation and rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{build_precision, replication_seed, simulate, DesignKind, PrecisionDesign, SimSpec};
use crate::error::{Error, Result};
use crate::glasso::GlassoConfig;
use crate::linalg::cholesky;
use crate::modelselect::{cv_seed, fglasso_cv_from_parts, CvPlan};
use crate::stats::mean_sd;
use crate::sur::{fit_ols, gls_with_moments, residual_covariance, Estimator, SurMoments};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub designs: Vec<DesignKind>,
    pub cells: Vec<Cell>,
    pub n_reps: usize,
    pub estimators: Vec<Estimator>,
    pub cv: CvPlan,
    pub glasso: GlassoConfig,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.designs.is_empty() {
            problems.push("designs must not be empty".to_string());
        }
        if self.cells.is_empty() {
            problems.push("cells must not be empty".to_string());
        }
        if self.n_reps == 0 {
            problems.push("n_reps must be at least 1".to_string());
        }
        if self.estimators.is_empty() {
            problems.push("estimators must not be empty".to_string());
        }
        for c in &self.cells {
            if c.n == 0 || c.t < 2 {
                problems.push(format!("cell N={} T={} needs N >= 1 and T >= 2", c.n, c.t));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }

    /// Estimators in canonical order without duplicates.
    fn estimator_set(&self) -> Vec<Estimator> {
        Estimator::ALL.into_iter().filter(|e| self.estimators.contains(e)).collect()
    }
}

/// One (design, N, T, replication, estimator) outcome. Norms are unscaled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub design: DesignKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub rep: usize,
    pub estimator: Estimator,
    pub linf: f64,
    pub rmse: f64,
    pub lambda: Option<f64>,
    pub sweeps: Option<usize>,
    /// Not deterministic; excluded from aggregate reports.
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub design: DesignKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub rep: Option<usize>,
    pub estimator: Option<Estimator>,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    fn of(xs: &[f64]) -> Option<Self> {
        (!xs.is_empty()).then(|| {
            let (mean, sd) = mean_sd(xs);
            Self { mean, sd }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub estimator: Estimator,
    /// Replications that produced an estimate.
    pub n_ok: usize,
    pub linf_x100: Stat,
    pub rmse_x100: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub design: DesignKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    /// FGLS was requested but T < N.
    pub fgls_undefined: bool,
    pub estimators: Vec<EstimatorStats>,
    /// Replications where FGLasso's l∞ error is no larger than FGLS's.
    pub win_linf: Option<usize>,
    /// Same for RMSE.
    pub win_rmse: Option<usize>,
    /// Replications where both FGLasso and FGLS ran.
    pub win_pairs: usize,
    pub lambda_x100: Option<Stat>,
}

impl CellReport {
    pub fn stats(&self, estimator: Estimator) -> Option<&EstimatorStats> {
        self.estimators.iter().find(|s| s.estimator == estimator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_reps: usize,
    pub seed: u64,
    pub cells: Vec<CellReport>,
    pub errors: Vec<ErrorRecord>,
}

impl McReport {
    pub fn cell(&self, design: DesignKind, n: usize, t: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.design == design && c.n == n && c.t == t)
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub report: McReport,
    pub raw: Vec<RawRecord>,
}

struct Task {
    design: DesignKind,
    cell: Cell,
    rep: usize,
}

#[derive(Default)]
struct RepOutcome {
    records: Vec<RawRecord>,
    errors: Vec<ErrorRecord>,
}

fn error_record(task: &Task, rep: Option<usize>, estimator: Option<Estimator>, e: &Error) -> ErrorRecord {
    ErrorRecord {
        design: task.design,
        n: task.cell.n,
        t: task.cell.t,
        rep,
        estimator,
        kind: e.kind().to_string(),
        message: e.to_string(),
    }
}

fn run_replication(spec: &SweepSpec, estimators: &[Estimator], task: &Task) -> RepOutcome {
    let mut out = RepOutcome::default();
    let Cell { n, t } = task.cell;
    let seed = replication_seed(spec.seed, task.design, n, t, task.rep);
    let sim = match simulate(&SimSpec::new(PrecisionDesign::new(task.design, n), t, seed)) {
        Ok(s) => s,
        Err(e) => {
            out.errors.push(error_record(task, Some(task.rep), None, &e));
            return out;
        }
    };
    let data = &sim.data;
    let moments = SurMoments::new(data);
    let ols = fit_ols(data);
    let sigma_hat = ols.as_ref().ok().map(residual_covariance);

    for &est in estimators {
        if est == Estimator::Fgls && t < n {
            continue;
        }
        let start = Instant::now();
        let fitted: Result<(Vec<f64>, Option<f64>, Option<usize>)> = match (est, &ols, &sigma_hat) {
            (Estimator::Gls, _, _) => gls_with_moments(data, &moments, &sim.true_omega, est).map(|f| (f.beta_hat, None, None)),
            (_, Err(e), _) => {
                out.errors.push(error_record(task, Some(task.rep), Some(est), e));
                continue;
            }
            (Estimator::Ols, Ok(f), _) => Ok((f.beta_hat.clone(), None, None)),
            (Estimator::Fgls, Ok(_), Some(s)) => cholesky(s)
                .map_err(|_| Error::SingularSigmaHat)
                .and_then(|c| gls_with_moments(data, &moments, &c.inverse(), est))
                .map(|f| (f.beta_hat, None, None)),
            (Estimator::Fglasso, Ok(_), Some(s)) => {
                fglasso_cv_from_parts(data, &moments, s, &spec.cv, cv_seed(seed), &spec.glasso)
                    .map(|r| (r.fit.beta_hat, Some(r.glasso.lambda), Some(r.glasso.sweeps_used)))
            }
            (_, Ok(_), None) => unreachable!("sigma_hat exists whenever OLS succeeded"),
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        match fitted {
            Ok((beta, lambda, sweeps)) => {
                let (linf, rmse) = beta_errors(&beta, &sim.true_beta);
                out.records.push(RawRecord {
                    design: task.design,
                    n,
                    t,
                    rep: task.rep,
                    estimator: est,
                    linf,
                    rmse,
                    lambda,
                    sweeps,
                    wall_ms,
                });
            }
            Err(e) => out.errors.push(error_record(task, Some(task.rep), Some(est), &e)),
        }
    }
    out
}

/// Runs the sweep on the global rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<McReport> {
    Ok(run_sweep_logged(spec)?.report)
}

/// Runs the sweep on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_sweep_logged(spec))
}

/// Runs the sweep and keeps the per-replication records.
pub fn run_sweep_logged(spec: &SweepSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let estimators = spec.estimator_set();
    let mut tasks = Vec::new();
    let mut setup_errors = Vec::new();
    for &design in &spec.designs {
        for &cell in &spec.cells {
            match build_precision(&PrecisionDesign::new(design, cell.n)) {
                Ok(_) => tasks.extend((0..spec.n_reps).map(|rep| Task { design, cell, rep })),
                Err(e) => setup_errors.push(error_record(&Task { design, cell, rep: 0 }, None, None, &e)),
            }
        }
    }
    // order-preserving collect keeps the output independent of scheduling
    let outcomes: Vec<RepOutcome> = tasks.par_iter().map(|task| run_replication(spec, &estimators, task)).collect();

    let mut raw = Vec::new();
    let mut errors = setup_errors;
    for o in outcomes {
        raw.extend(o.records);
        errors.extend(o.errors);
    }
    let report = aggregate(spec, &estimators, &raw, errors);
    Ok(SweepOutput { report, raw })
}

fn aggregate(spec: &SweepSpec, estimators: &[Estimator], raw: &[RawRecord], errors: Vec<ErrorRecord>) -> McReport {
    let mut by_cell: BTreeMap<(usize, Cell), Vec<&RawRecord>> = BTreeMap::new();
    for r in raw {
        let d = spec.designs.iter().position(|&d| d == r.design).expect("record design is in spec");
        by_cell.entry((d, Cell { n: r.n, t: r.t })).or_default().push(r);
    }
    let mut cells = Vec::new();
    for (d, &design) in spec.designs.iter().enumerate() {
        for &cell in &spec.cells {
            let Some(records) = by_cell.get(&(d, cell)) else { continue };
            let of = |e: Estimator| -> Vec<&RawRecord> {
                let mut v: Vec<&RawRecord> = records.iter().copied().filter(|r| r.estimator == e).collect();
                v.sort_by_key(|r| r.rep);
                v
            };
            let stats = estimators
                .iter()
                .filter_map(|&e| {
                    let recs = of(e);
                    let linf: Vec<f64> = recs.iter().map(|r| r.linf * 100.0).collect();
                    let rmse: Vec<f64> = recs.iter().map(|r| r.rmse * 100.0).collect();
                    Some(EstimatorStats {
                        estimator: e,
                        n_ok: recs.len(),
                        linf_x100: Stat::of(&linf)?,
                        rmse_x100: Stat::of(&rmse)?,
                    })
                })
                .collect();

            let fgl = of(Estimator::Fglasso);
            let fgls: BTreeMap<usize, &RawRecord> = of(Estimator::Fgls).into_iter().map(|r| (r.rep, r)).collect();
            let pairs: Vec<(&RawRecord, &RawRecord)> =
                fgl.iter().filter_map(|a| fgls.get(&a.rep).map(|b| (*a, *b))).collect();
            let both_requested = estimators.contains(&Estimator::Fglasso) && estimators.contains(&Estimator::Fgls);
            let wins = |f: fn(&RawRecord) -> f64| {
                (both_requested && !pairs.is_empty()).then(|| pairs.iter().filter(|(a, b)| f(a) <= f(b)).count())
            };
            let lambdas: Vec<f64> = fgl.iter().filter_map(|r| r.lambda).map(|l| l * 100.0).collect();

            cells.push(CellReport {
                design,
                n: cell.n,
                t: cell.t,
                fgls_undefined: estimators.contains(&Estimator::Fgls) && cell.t < cell.n,
                estimators: stats,
                win_linf: wins(|r| r.linf),
                win_rmse: wins(|r| r.rmse),
                win_pairs: pairs.len(),
                lambda_x100: Stat::of(&lambdas),
            });
        }
    }
    McReport { n_reps: spec.n_reps, seed: spec.seed, cells, errors }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Text,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "text" | "txt" => Ok(Self::Text),
            other => Err(Error::InvalidArgument(format!("unknown table format {other:?}"))),
        }
    }
}

/// Column order of the aggregate CSV: one row per (design, N, T) cell.
pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["design", "N", "T", "n_reps", "fgls_undefined"].map(String::from).into();
    for e in Estimator::ALL {
        for m in ["n_ok", "linf_mean_x100", "linf_sd_x100", "rmse_mean_x100", "rmse_sd_x100"] {
            h.push(format!("{}_{m}", e.key()));
        }
    }
    h.extend(["win_linf", "win_rmse", "win_pairs", "lambda_mean_x100", "lambda_sd_x100"].map(String::from));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_table(report: &McReport, format: TableFormat) -> Result<String> {
    match format {
        TableFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        TableFormat::Csv => render_csv(report),
        TableFormat::Text => Ok(render_text(report)),
    }
}

fn render_csv(report: &McReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(csv_header()).map_err(io)?;
    for c in &report.cells {
        let mut rec = vec![
            c.design.key().to_string(),
            c.n.to_string(),
            c.t.to_string(),
            report.n_reps.to_string(),
            c.fgls_undefined.to_string(),
        ];
        for e in Estimator::ALL {
            match c.stats(e) {
                Some(s) => rec.extend([
                    s.n_ok.to_string(),
                    s.linf_x100.mean.to_string(),
                    s.linf_x100.sd.to_string(),
                    s.rmse_x100.mean.to_string(),
                    s.rmse_x100.sd.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
        }
        rec.extend([
            opt(c.win_linf),
            opt(c.win_rmse),
            c.win_pairs.to_string(),
            opt(c.lambda_x100.map(|s| s.mean)),
            opt(c.lambda_x100.map(|s| s.sd)),
        ]);
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn render_text(report: &McReport) -> String {
    const W: usize = 9;
    let mut out = String::new();
    // one block per (design, T); N runs across the columns
    let mut blocks: Vec<(DesignKind, usize)> = Vec::new();
    for c in &report.cells {
        if !blocks.contains(&(c.design, c.t)) {
            blocks.push((c.design, c.t));
        }
    }
    for (design, t) in blocks {
        let cells: Vec<&CellReport> = report.cells.iter().filter(|c| c.design == design && c.t == t).collect();
        let _ = writeln!(out, "{} (T={t}, {} replications)", design.label(), report.n_reps);
        let estimators: Vec<Estimator> =
            Estimator::ALL.into_iter().filter(|&e| cells.iter().any(|c| c.stats(e).is_some())).collect();
        for (title, pick) in [
            ("l_inf x100", (|s: &EstimatorStats| s.linf_x100) as fn(&EstimatorStats) -> Stat),
            ("RMSE x100", |s: &EstimatorStats| s.rmse_x100),
        ] {
            let _ = write!(out, "  {title:<12}");
            for c in &cells {
                let _ = write!(out, "{:>W$}", format!("N={}", c.n));
            }
            out.push('\n');
            for &e in &estimators {
                let _ = write!(out, "  {:<12}", e.label());
                for c in &cells {
                    let v = c.stats(e).map(|s| format!("{:.2}", pick(s).mean)).unwrap_or_default();
                    let _ = write!(out, "{v:>W$}");
                }
                out.push_str("\n  ");
                out.push_str(&" ".repeat(12));
                for c in &cells {
                    let v = c.stats(e).map(|s| format!("({:.2})", pick(s).sd)).unwrap_or_default();
                    let _ = write!(out, "{v:>W$}");
                }
                out.push('\n');
            }
            if cells.iter().any(|c| c.win_linf.is_some()) {
                let _ = write!(out, "  {:<12}", "Percentage");
                for c in &cells {
                    let v = if title.starts_with("l_inf") { c.win_linf } else { c.win_rmse };
                    let _ = write!(out, "{:>W$}", opt(v));
                }
                out.push('\n');
            }
        }
        if cells.iter().any(|c| c.lambda_x100.is_some()) {
            let _ = write!(out, "  {:<12}", "lambda x100");
            for c in &cells {
                let v = c.lambda_x100.map(|s| format!("{:.2}", s.mean)).unwrap_or_default();
                let _ = write!(out, "{v:>W$}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    for e in &report.errors {
        let _ = writeln!(
            out,
            "error: {} N={} T={} rep={} estimator={}: {}",
            e.design,
            e.n,
            e.t,
            opt(e.rep),
            opt(e.estimator.map(|x| x.key())),
            e.message
        );
    }
    out
}

/// Writes the raw log with header design,N,T,rep,estimator,linf,rmse,lambda,sweeps,wall_ms.
/// Absent values (no λ, no sweeps, untimed) are empty fields.
pub fn write_raw_log<W: Write>(records: &[RawRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["design", "N", "T", "rep", "estimator", "linf", "rmse", "lambda", "sweeps", "wall_ms"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.design.key().to_string(),
            r.n.to_string(),
            r.t.to_string(),
            r.rep.to_string(),
            r.estimator.key().to_string(),
            r.linf.to_string(),
            r.rmse.to_string(),
            opt(r.lambda),
            opt(r.sweeps),
            if r.wall_ms.is_nan() { String::new() } else { format!("{:.3}", r.wall_ms) },
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a raw log written by [`write_raw_log`].
pub fn read_raw_log<R: std::io::Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let parse = |detail: String| Error::Parse { file: "raw log".into(), detail };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| field(i).parse::<f64>().map_err(|e| parse(format!("column {i}: {e}")));
        let int = |i: usize| field(i).parse::<usize>().map_err(|e| parse(format!("column {i}: {e}")));
        out.push(RawRecord {
            design: field(0).parse()?,
            n: int(1)?,
            t: int(2)?,
            rep: int(3)?,
            estimator: field(4).parse()?,
            linf: num(5)?,
            rmse: num(6)?,
            lambda: if field(7).is_empty() { None } else { Some(num(7)?) },
            sweeps: if field(8).is_empty() { None } else { Some(int(8)?) },
            wall_ms: if field(9).is_empty() { f64::NAN } else { num(9)? },
        });
    }
    Ok(out)
}

/// l∞ and RMSE (‖·‖_F/√(KN)) of an estimate against the truth, unscaled.
pub fn beta_errors(beta_hat: &[f64], beta: &[f64]) -> (f64, f64) {
    let diff: Vec<f64> = beta_hat.iter().zip(beta).map(|(a, b)| a - b).collect();
    let linf = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let rmse = diff.iter().map(|d| d * d).sum::<f64>().sqrt() / (diff.len() as f64).sqrt();
    (linf, rmse)
}
