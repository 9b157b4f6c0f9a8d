//! Experiment runner behind `vibench`: configs, bound tables and output files.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extragradient::extragradient_fixed;
use crate::problems::{add_gaussian_noise, GaussianOracle, ProblemDescription, VIProblem};
use crate::sump::{lemma3_bound, mean_and_stderr, run_seeds, theorem2_bound};
use crate::ump::{
    resolve_diameter, run, step_parameter_bound, theorem1_bound, LogCadence, RunOptions, RunReport, SolverKind,
};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_ECHO_FILE: &str = "config.echo.json";
pub const REPORT_FILE: &str = "report.json";

/// One experiment as read from a JSON config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem_spec: ProblemDescription,
    pub solver: SolverKind,
    pub iterations: u64,
    /// Seeds for the stochastic solver, one run each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Noise level of the Gaussian oracle (stochastic solver only).
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub log_cadence: LogCadence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "L0_override", skip_serializing_if = "Option::is_none")]
    pub l0_override: Option<f64>,
    #[serde(default, rename = "D_override", skip_serializing_if = "Option::is_none")]
    pub d_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Iterations that are always logged.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<u64>,
}

/// A validated config with its problem built.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: VIProblem,
    oracle: Option<GaussianOracle>,
    options: RunOptions,
    step: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Checks every field and builds the problem, oracle and run options.
    pub fn prepare(&self) -> Result<Experiment> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        let stochastic = self.solver == SolverKind::UmpStochastic;
        if stochastic && self.seeds.is_empty() {
            return Err(invalid("the stochastic solver needs at least one seed"));
        }
        if !stochastic && !self.seeds.is_empty() {
            return Err(invalid("seeds apply only to the stochastic solver"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds must be distinct"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if !stochastic && self.sigma != 0.0 {
            return Err(invalid("sigma applies only to the stochastic solver"));
        }
        for (name, value) in [("L0_override", self.l0_override), ("D_override", self.d_override)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let LogCadence::Geometric { ratio, .. } = self.log_cadence {
            if !(ratio > 1.0 && ratio.is_finite()) {
                return Err(invalid(format!("log ratio must exceed 1, got {ratio}")));
            }
        }

        let problem = VIProblem::from_description(&self.problem_spec)?;
        resolve_diameter(problem.set(), self.d_override)?;
        if let Some(start) = &self.start {
            if start.len() != problem.set().dim() {
                return Err(invalid(format!(
                    "start has dimension {}, problem has {}",
                    start.len(),
                    problem.set().dim()
                )));
            }
            if start.iter().any(|v| !v.is_finite()) {
                return Err(invalid("start must be finite"));
            }
        }
        let oracle = if stochastic {
            Some(add_gaussian_noise(&problem, self.sigma)?)
        } else {
            None
        };
        let step = if self.solver == SolverKind::ExtragradientFixed {
            match (problem.known_nu(), problem.known_l()) {
                (Some(nu), Some(l1)) if nu == 1.0 && l1 > 0.0 => Some(1.0 / l1),
                _ => {
                    return Err(invalid(
                        "the extragradient baseline needs a declared Lipschitz constant",
                    ))
                }
            }
        } else {
            None
        };
        let options = RunOptions {
            l0_override: self.l0_override,
            d_override: self.d_override,
            start: self.start.clone(),
            cadence: self.log_cadence.clone(),
            checkpoints: self.checkpoints.clone(),
            record_averages: problem.has_exact_gap(),
        };
        Ok(Experiment {
            config: self.clone(),
            problem,
            oracle,
            options,
            step,
        })
    }
}

impl Experiment {
    /// Runs the solver; stochastic seeds run in parallel.
    pub fn execute(&self) -> Result<BenchReport> {
        let k = self.config.iterations;
        let runs = match self.config.solver {
            SolverKind::Ump => vec![run(&self.problem, k, &self.options)?],
            SolverKind::UmpStochastic => {
                let oracle = self.oracle.as_ref().expect("prepared with an oracle");
                run_seeds(&self.problem, oracle, k, &self.config.seeds, &self.options)?
                    .into_iter()
                    .map(|r| r.report)
                    .collect()
            }
            SolverKind::ExtragradientFixed => {
                let step = self.step.expect("prepared with a step");
                vec![extragradient_fixed(&self.problem, k, step, &self.options)?]
            }
        };
        Ok(BenchReport {
            label: self.problem.label().to_string(),
            solver: self.config.solver,
            iterations: k,
            sigma: self.config.sigma,
            seeds: self.config.seeds.clone(),
            runs,
        })
    }

    /// The config as run, with the problem's declared constants filled in.
    pub fn echo(&self) -> ExperimentConfig {
        let mut echo = self.config.clone();
        if let Ok(desc) = self.problem.describe() {
            echo.problem_spec = desc;
        }
        echo
    }
}

/// All runs of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub label: String,
    pub solver: SolverKind,
    pub iterations: u64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// One report per seed, or a single report for deterministic solvers.
    pub runs: Vec<RunReport>,
}

impl BenchReport {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Verdict {
    fn check(value: Option<f64>, bound: Option<f64>) -> Verdict {
        match (value, bound) {
            (Some(v), Some(b)) if v <= b + 1e-12 * b.abs().max(1.0) => Verdict::Pass,
            (Some(_), Some(_)) => Verdict::Fail,
            _ => Verdict::NotApplicable,
        }
    }

    /// Fails if any input fails, passes if at least one passes.
    pub fn all(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut out = Verdict::NotApplicable;
        for v in verdicts {
            match v {
                Verdict::Fail => return Verdict::Fail,
                Verdict::Pass => out = Verdict::Pass,
                Verdict::NotApplicable => {}
            }
        }
        out
    }

    pub fn as_flag(self) -> Option<bool> {
        match self {
            Verdict::Pass => Some(true),
            Verdict::Fail => Some(false),
            Verdict::NotApplicable => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "n/a",
        })
    }
}

/// One logged iteration of a bound comparison. Values are means over runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub k: u64,
    pub l: f64,
    pub l_bound: Option<f64>,
    pub certificate: f64,
    pub theorem_bound: Option<f64>,
    pub exact_gap: Option<f64>,
    /// Standard error of the mean gap over seeds.
    pub gap_stderr: Option<f64>,
    /// `L` against its bound.
    pub l_verdict: Verdict,
    /// Gap against the theorem bound (plus two standard errors for
    /// stochastic runs).
    pub theorem_verdict: Verdict,
    /// Gap against the run-time certificate.
    pub certificate_verdict: Verdict,
}

impl BoundRow {
    pub fn verdict(&self) -> Verdict {
        Verdict::all([self.l_verdict, self.theorem_verdict, self.certificate_verdict])
    }
}

/// Conjunction of the per-row verdicts; `None` when nothing was checkable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundFlags {
    pub l_bound: Option<bool>,
    pub theorem_bound: Option<bool>,
    pub certificate: Option<bool>,
    pub all: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub label: String,
    pub solver: SolverKind,
    pub runs: usize,
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub fn flags(&self) -> BoundFlags {
        BoundFlags {
            l_bound: Verdict::all(self.rows.iter().map(|r| r.l_verdict)).as_flag(),
            theorem_bound: Verdict::all(self.rows.iter().map(|r| r.theorem_verdict)).as_flag(),
            certificate: Verdict::all(self.rows.iter().map(|r| r.certificate_verdict)).as_flag(),
            all: Verdict::all(self.rows.iter().map(BoundRow::verdict)).as_flag(),
        }
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let blank = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"));
        let mut out = format!(
            "{} ({:?}, {} run{})\n{:>10} {:>13} {:>13} {:>13} {:>13} {:>13} {:>8}\n",
            self.label,
            self.solver,
            self.runs,
            if self.runs == 1 { "" } else { "s" },
            "k",
            "L_k",
            "L bound",
            "certificate",
            "exact gap",
            "theorem",
            "verdict"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>10} {:>13.6e} {:>13} {:>13.6e} {:>13} {:>13} {:>8}\n",
                r.k,
                r.l,
                blank(r.l_bound),
                r.certificate,
                blank(r.exact_gap),
                blank(r.theorem_bound),
                r.verdict().to_string()
            ));
        }
        out
    }

    /// Writes the trajectory CSV: `k, L_k, certificate, exact_gap_or_blank,
    /// theorem_bound`.
    pub fn write_trajectory<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["k", "L_k", "certificate", "exact_gap_or_blank", "theorem_bound"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            csv.write_record([
                r.k.to_string(),
                r.l.to_string(),
                r.certificate.to_string(),
                opt(r.exact_gap),
                opt(r.theorem_bound),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Checks every logged row of `report` against the bounds that apply to its
/// solver, using the constants declared by `problem`.
pub fn compare_bounds(report: &BenchReport, problem: &VIProblem) -> Result<BoundTable> {
    let first = report.runs.first().ok_or_else(|| invalid("report has no runs"))?;
    let ks: Vec<u64> = first.rows.iter().map(|r| r.k).collect();
    if report
        .runs
        .iter()
        .any(|r| r.rows.iter().map(|x| x.k).ne(ks.iter().copied()))
    {
        return Err(invalid("runs in the report have different logged iterations"));
    }
    let dim = problem.set().dim();
    if report.runs.iter().any(|r| r.w_hat.dim() != dim) {
        return Err(invalid("report does not match the problem dimension"));
    }
    let with_gaps = problem.has_exact_gap() && report.runs.iter().all(|r| r.averages.len() == ks.len());
    let d = first.diameter;
    let l0 = mean(report.runs.iter().map(|r| r.l0));
    let constants = problem.holder();

    let mut rows = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let l = mean(report.runs.iter().map(|r| r.rows[i].l));
        let certificate = mean(report.runs.iter().map(|r| r.rows[i].certificate));
        let (exact_gap, gap_stderr) = if with_gaps {
            let gaps = report
                .runs
                .iter()
                .map(|r| problem.exact_gap(&r.averages[i]).map(|g| g.value))
                .collect::<Result<Vec<f64>>>()?;
            let (m, se) = mean_and_stderr(&gaps);
            (Some(m), (gaps.len() > 1).then_some(se))
        } else {
            (None, None)
        };

        let (l_bound, theorem_bound, slack, certified) = match (report.solver, constants) {
            (SolverKind::Ump, Some(h)) => (
                Some(step_parameter_bound(k, d, h.nu, h.l_nu, l0)),
                Some(theorem1_bound(k, d, h.nu, h.l_nu)),
                0.0,
                true,
            ),
            (SolverKind::UmpStochastic, Some(h)) => (
                Some(lemma3_bound(k, d, h.nu, h.l_nu, report.sigma, l0)),
                Some(theorem2_bound(k, d, h.nu, h.l_nu, report.sigma, l0)),
                2.0 * gap_stderr.unwrap_or(0.0),
                false,
            ),
            (SolverKind::UmpStochastic, None) => (None, None, 0.0, false),
            _ => (None, None, 0.0, true),
        };
        rows.push(BoundRow {
            k,
            l,
            l_bound,
            certificate,
            theorem_bound,
            exact_gap,
            gap_stderr,
            l_verdict: Verdict::check(Some(l), l_bound),
            theorem_verdict: Verdict::check(exact_gap, theorem_bound.map(|b| b + slack)),
            certificate_verdict: if certified {
                Verdict::check(exact_gap, Some(certificate))
            } else {
                Verdict::NotApplicable
            },
        });
    }
    Ok(BoundTable {
        label: report.label.clone(),
        solver: report.solver,
        runs: report.runs.len(),
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    SolverError,
}

/// Final state of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalIterate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub w_hat: Vec<f64>,
    pub l: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_gap: Option<f64>,
    pub oracle_calls: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub k: u64,
    pub l: f64,
    pub l_bound: Option<f64>,
    pub certificate: f64,
    pub exact_gap: Option<f64>,
    pub gap_stderr: Option<f64>,
    pub theorem_bound: Option<f64>,
    pub iterates: Vec<FinalIterate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub message: String,
    pub iteration: Option<u64>,
    pub seed: Option<u64>,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub solver: SolverKind,
    pub status: RunStatus,
    pub iterations: u64,
    pub seeds: Vec<u64>,
    pub sigma: f64,
    pub wall_time_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_metrics: Option<FinalMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundFlags>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Failure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Why an experiment did not complete.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    Config(#[source] Error),
    #[error("solver failed: {0}")]
    Solver(#[source] Error),
    #[error("could not write outputs: {0}")]
    Output(#[source] Error),
}

impl BenchError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Solver(_) | BenchError::Output(_) => 3,
        }
    }
}

pub struct ExperimentOutcome {
    pub report: BenchReport,
    pub table: BoundTable,
    pub summary: Summary,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Validates `config`, runs it and writes `trajectory.csv`, `summary.json`,
/// `config.echo.json` and `report.json` into `out_dir`.
///
/// Nothing is written for an invalid config. On a solver failure only the
/// echo and a summary recording the failing iteration are written.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> std::result::Result<ExperimentOutcome, BenchError> {
    let started = Instant::now();
    let experiment = config.prepare().map_err(BenchError::Config)?;
    let result = experiment.execute();
    let wall_time_secs = started.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| BenchError::Config(e.into()))?;
    write_json(&out_dir.join(CONFIG_ECHO_FILE), &experiment.echo()).map_err(BenchError::Output)?;
    let report = match result {
        Ok(report) => report,
        Err(e) => {
            let summary = Summary {
                label: experiment.problem.label().to_string(),
                solver: config.solver,
                status: RunStatus::SolverError,
                iterations: config.iterations,
                seeds: config.seeds.clone(),
                sigma: config.sigma,
                wall_time_secs,
                final_metrics: None,
                bounds: None,
                error: Some(Failure {
                    message: e.to_string(),
                    iteration: e.iteration(),
                    seed: e.seed(),
                }),
                warnings: Vec::new(),
            };
            write_json(&out_dir.join(SUMMARY_FILE), &summary).map_err(BenchError::Output)?;
            return Err(BenchError::Solver(e));
        }
    };

    let table = compare_bounds(&report, &experiment.problem).map_err(BenchError::Solver)?;
    let summary = summarize(&report, &table, &experiment.problem, wall_time_secs).map_err(BenchError::Solver)?;
    let write = || -> Result<()> {
        table.write_trajectory(fs::File::create(out_dir.join(TRAJECTORY_FILE))?)?;
        write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
        write_json(&out_dir.join(REPORT_FILE), &report)?;
        Ok(())
    };
    write().map_err(BenchError::Output)?;
    Ok(ExperimentOutcome { report, table, summary })
}

fn summarize(report: &BenchReport, table: &BoundTable, problem: &VIProblem, wall_time_secs: f64) -> Result<Summary> {
    let last = table.rows.last().ok_or_else(|| invalid("no logged rows"))?;
    let iterates = report
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let exact_gap = if problem.has_exact_gap() {
                Some(problem.exact_gap(&r.w_hat)?.value)
            } else {
                None
            };
            Ok(FinalIterate {
                seed: report.seeds.get(i).copied(),
                w_hat: r.w_hat.to_vec(),
                l: r.rows.last().map_or(r.l0, |row| row.l),
                exact_gap,
                oracle_calls: r.oracle_calls,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings: Vec<String> = report.runs.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
    warnings.dedup();
    Ok(Summary {
        label: report.label.clone(),
        solver: report.solver,
        status: RunStatus::Ok,
        iterations: report.iterations,
        seeds: report.seeds.clone(),
        sigma: report.sigma,
        wall_time_secs,
        final_metrics: Some(FinalMetrics {
            k: last.k,
            l: last.l,
            l_bound: last.l_bound,
            certificate: last.certificate,
            exact_gap: last.exact_gap,
            gap_stderr: last.gap_stderr,
            theorem_bound: last.theorem_bound,
            iterates,
        }),
        bounds: Some(table.flags()),
        error: None,
        warnings,
    })
}
