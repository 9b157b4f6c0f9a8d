use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use umprox::bench::{
    compare_bounds, run_experiment, BenchError, BenchReport, BoundFlags, BoundTable, ExperimentConfig,
};
use umprox::problems::ProblemDescription;
use umprox::suite;
use umprox::VIProblem;

const CONFIG_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "vibench", version, about = "Benchmarks for universal mirror-prox solvers")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds for the stochastic solver.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Number of iterations.
        #[arg(long)]
        iters: Option<u64>,
    },
    /// Check a saved report against the bounds for a problem.
    Compare {
        report: PathBuf,
        problem: PathBuf,
        /// Also write the table as `bounds.json` and `trajectory.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Suite {
        /// Write `suite.json` with the outcomes here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            iters,
        } => cmd_run(&config, out, seeds, iters, cli.quiet),
        Command::Compare { report, problem, out } => cmd_compare(&report, &problem, out.as_deref(), cli.quiet),
        Command::Suite { out } => cmd_suite(out.as_deref(), cli.quiet),
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("vibench: {msg}");
    ExitCode::from(code)
}

fn print_flags(flags: &BoundFlags) {
    let show = |f: Option<bool>| match f {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "n/a",
    };
    println!(
        "bounds: L {}  theorem {}  certificate {}",
        show(flags.l_bound),
        show(flags.theorem_bound),
        show(flags.certificate)
    );
}

fn cmd_run(path: &Path, out: Option<PathBuf>, seeds: Option<Vec<u64>>, iters: Option<u64>, quiet: bool) -> ExitCode {
    let mut config = match ExperimentConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", path.display())),
    };
    if let Some(seeds) = seeds {
        config.seeds = seeds;
    }
    if let Some(k) = iters {
        config.iterations = k;
    }
    let out_dir = out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("vibench-out"));

    match run_experiment(&config, &out_dir) {
        Ok(outcome) => {
            if !quiet {
                let s = &outcome.summary;
                if let Some(m) = &s.final_metrics {
                    println!("{}: {} iterations in {:.3}s", s.label, s.iterations, s.wall_time_secs);
                    println!("final L = {:.6e}, certificate = {:.6e}", m.l, m.certificate);
                    if let Some(gap) = m.exact_gap {
                        println!("exact gap = {gap:.6e}");
                    }
                }
                if let Some(flags) = &s.bounds {
                    print_flags(flags);
                }
                println!("outputs written to {}", out_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ BenchError::Config(_)) => fail(CONFIG_ERROR, e),
        Err(e) => {
            let code = u8::try_from(e.exit_code()).unwrap_or(SOLVER_ERROR);
            fail(code, e)
        }
    }
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    flags: BoundFlags,
    table: &'a BoundTable,
}

fn cmd_compare(report: &Path, problem: &Path, out: Option<&Path>, quiet: bool) -> ExitCode {
    let report = match BenchReport::from_path(report) {
        Ok(r) => r,
        Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", report.display())),
    };
    let desc: ProblemDescription = match fs::read_to_string(problem)
        .map_err(umprox::Error::from)
        .and_then(|t| serde_json::from_str(&t).map_err(umprox::Error::from))
    {
        Ok(d) => d,
        Err(e) => return fail(CONFIG_ERROR, format!("{}: {e}", problem.display())),
    };
    let table = match VIProblem::from_description(&desc).and_then(|p| compare_bounds(&report, &p)) {
        Ok(t) => t,
        Err(e) => return fail(CONFIG_ERROR, e),
    };
    if !quiet {
        print!("{}", table.render());
        print_flags(&table.flags());
    }
    if let Some(dir) = out {
        let written = fs::create_dir_all(dir).map_err(umprox::Error::from).and_then(|_| {
            let text = serde_json::to_string_pretty(&CompareOutput {
                flags: table.flags(),
                table: &table,
            })?;
            fs::write(dir.join("bounds.json"), text + "\n")?;
            table.write_trajectory(fs::File::create(dir.join("trajectory.csv"))?)
        });
        if let Err(e) = written {
            return fail(SOLVER_ERROR, e);
        }
    }
    ExitCode::SUCCESS
}

#[derive(Serialize)]
struct SuiteLine {
    id: u8,
    name: &'static str,
    passed: bool,
    seconds: f64,
    detail: String,
}

fn cmd_suite(out: Option<&Path>, quiet: bool) -> ExitCode {
    let outcomes = suite::run_all(|o| {
        if !quiet || !o.passed {
            println!("{o}");
        }
    });
    let passed = outcomes.iter().filter(|o| o.passed).count();
    if !quiet {
        println!("{passed}/{} criteria passed", outcomes.len());
    }
    if let Some(dir) = out {
        let lines: Vec<SuiteLine> = outcomes
            .iter()
            .map(|o| SuiteLine {
                id: o.id,
                name: o.name,
                passed: o.passed,
                seconds: o.seconds,
                detail: o.detail.clone(),
            })
            .collect();
        let written = fs::create_dir_all(dir).and_then(|_| {
            fs::write(
                dir.join("suite.json"),
                serde_json::to_string_pretty(&lines).expect("serializable") + "\n",
            )
        });
        if let Err(e) = written {
            return fail(SOLVER_ERROR, e);
        }
    }
    if passed == outcomes.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
