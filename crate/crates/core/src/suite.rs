//! The benchmark suite: a fixed set of problems with known constants and the
//! acceptance criteria run by `vibench suite`.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::{run_experiment, ExperimentConfig, TRAJECTORY_FILE};
use crate::error::Result;
use crate::gap::gap_matrix_game;
use crate::operator::StochasticOracle;
use crate::point::Point;
use crate::problems::{
    add_gaussian_noise, make_affine_monotone, make_fixed_point_affine, make_holder_1d, make_matrix_game,
    ProblemDescription, ProblemSpec, VIProblem,
};
use crate::prox::prox_step;
use crate::set::FeasibleSet;
use crate::sump::{lemma3_bound, mean_and_stderr, run_seeds, sump_iterate, theorem2_bound, SampleStreams};
use crate::ump::{
    l_update, lemma2_bound, run, theorem1_bound, ump_iterate, LogCadence, RunOptions, SolverKind, SolverState,
};
use crate::verify::{game_gap_vertices, project_bruteforce, prox_bruteforce};

/// Start used on the one-dimensional problems, whose default start is
/// already the solution.
pub const HOLDER_START: f64 = 0.7;

/// Off-equilibrium start for rate measurements on the 2×2 skew game; from
/// the default start the first step lands on the equilibrium.
pub const SKEW_RATE_START: [f64; 4] = [1.0, 0.0, 1.0, 0.0];

/// A suite problem and the start point its runs use.
pub struct SuiteProblem {
    pub problem: VIProblem,
    pub start: Option<Vec<f64>>,
}

impl SuiteProblem {
    pub fn options(&self) -> RunOptions {
        RunOptions {
            start: self.start.clone(),
            ..RunOptions::default()
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        self.problem.known_nu() == Some(1.0)
    }
}

pub fn skew_matrix() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![-1.0, 0.0]]
}

/// 3×3 matrix with entries uniform on `[−1, 1]`.
pub fn random_matrix(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

pub fn skew_game() -> VIProblem {
    make_matrix_game(skew_matrix())
        .expect("valid matrix")
        .with_label("skew_2x2")
}

pub fn random_game(seed: u64) -> VIProblem {
    make_matrix_game(random_matrix(seed))
        .expect("valid matrix")
        .with_label(format!("random_3x3_seed{seed}"))
}

pub const RANDOM_GAME_SEEDS: [u64; 3] = [1, 2, 3];

fn holder(nu: f64) -> SuiteProblem {
    SuiteProblem {
        problem: make_holder_1d(nu).expect("ν in range"),
        start: Some(vec![HOLDER_START]),
    }
}

/// Every problem in the suite.
pub fn suite_problems() -> Result<Vec<SuiteProblem>> {
    let mut out = vec![SuiteProblem {
        problem: skew_game(),
        start: None,
    }];
    out.extend(RANDOM_GAME_SEEDS.iter().map(|&s| SuiteProblem {
        problem: random_game(s),
        start: None,
    }));
    out.extend([0.0, 0.5, 1.0].map(holder));

    let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -2.0, 0.5]);
    let affine = make_affine_monotone(m, vec![0.3, -0.2], FeasibleSet::ball(vec![0.0, 0.0], 1.0)?)?;
    out.push(SuiteProblem {
        problem: affine.with_label("affine_2d_ball"),
        start: None,
    });

    let (s, c) = (0.9f64.sin(), 0.9f64.cos());
    let rotation = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let rot = make_fixed_point_affine(rotation, vec![0.0, 0.0], FeasibleSet::cube(2, -1.0, 1.0)?)?;
    out.push(SuiteProblem {
        problem: rot.with_label("fixed_point_rotation"),
        start: Some(vec![0.7, 0.7]),
    });

    let half = DMatrix::from_diagonal_element(2, 2, 0.5);
    let avg = make_fixed_point_affine(half, vec![0.15, -0.2], FeasibleSet::cube(2, -1.0, 1.0)?)?;
    out.push(SuiteProblem {
        problem: avg.with_label("fixed_point_averaging"),
        start: None,
    });
    Ok(out)
}

/// Result of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<32} {}  ({:.2}s) {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

type Check = fn() -> Result<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check); 11] = [
    (1, "L-update identity", l_update_identity),
    (2, "certificate dominance", certificate_dominance),
    (3, "step bound, Lipschitz", step_bound_lipschitz),
    (4, "step bound, nu = 0", step_bound_sign),
    (5, "rate bound dominance", rate_bound_dominance),
    (6, "rate ordering", rate_ordering),
    (7, "zero-noise reduction", zero_noise_reduction),
    (8, "stochastic step bound", stochastic_step_bound),
    (9, "stochastic gap bound", stochastic_gap_bound),
    (10, "oracle cross-validation", oracle_cross_validation),
    (11, "reproducible output", reproducible_output),
];

/// Runs one criterion; errors count as failures.
pub fn run_criterion(id: u8) -> Option<CriterionOutcome> {
    let &(id, name, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let started = Instant::now();
    let (passed, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(CriterionOutcome {
        id,
        name,
        passed,
        detail,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Runs all criteria in order, reporting each as it finishes.
pub fn run_all(mut on_done: impl FnMut(&CriterionOutcome)) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .map(|c| {
            let outcome = run_criterion(c.0).expect("listed criterion");
            on_done(&outcome);
            outcome
        })
        .collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn l_update_identity() -> Result<(bool, String)> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let l = log_uniform(&mut rng, -3.0, 3.0);
        let inner = rng.random_range(-1.0..1.0) * log_uniform(&mut rng, -3.0, 2.0);
        let dz = if rng.random_bool(0.05) {
            0.0
        } else {
            log_uniform(&mut rng, -6.0, 1.0)
        };
        let d = log_uniform(&mut rng, -2.0, 2.0);
        let next = l_update(l, inner, dz, d)?;
        let lhs = (next - l) * d * d / 2.0;
        let rhs = (inner - next * dz / 2.0).max(0.0);
        worst = worst.max((lhs - rhs).abs() / next.max(1.0));
    }
    let secs = started.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-10 && secs < 1.0,
        format!("max scaled residual {worst:.2e}, {secs:.3}s"),
    ))
}

fn game_gap(problem: &VIProblem, w: &Point) -> f64 {
    let Some(ProblemSpec::MatrixGame { a }) = problem.spec() else {
        unreachable!("matrix game")
    };
    let m = a.len();
    let mat = DMatrix::from_fn(m, a[0].len(), |i, j| a[i][j]);
    game_gap_vertices(&mat, &w[..m], &w[m..])
}

fn games() -> Vec<VIProblem> {
    let mut out = vec![skew_game()];
    out.extend(RANDOM_GAME_SEEDS.iter().map(|&s| random_game(s)));
    out
}

fn certificate_dominance() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for p in games() {
        let started = Instant::now();
        let opts = RunOptions {
            record_averages: true,
            ..RunOptions::default()
        };
        let report = run(&p, 10_000, &opts)?;
        let violations = report
            .rows
            .iter()
            .zip(&report.averages)
            .filter(|(row, w)| game_gap(&p, w) > row.certificate)
            .count();
        let secs = started.elapsed().as_secs_f64();
        ok &= violations == 0 && secs < 10.0;
        parts.push(format!(
            "{} {} violations/{} rows",
            p.label(),
            violations,
            report.rows.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn step_bound_lipschitz() -> Result<(bool, String)> {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for sp in suite_problems()?.into_iter().filter(SuiteProblem::is_lipschitz) {
        let l1 = sp.problem.known_l().expect("declared");
        let opts = RunOptions {
            cadence: LogCadence::Every,
            ..sp.options()
        };
        let report = run(&sp.problem, 10_000, &opts)?;
        let max_l = report.rows.iter().map(|r| r.l).fold(report.l0, f64::max);
        ok &= max_l <= l1 * (1.0 + 1e-9);
        worst = worst.max(max_l / l1);
        checked += 1;
    }
    Ok((ok, format!("{checked} problems, max L/L1 = {worst:.12}")))
}

fn step_bound_sign() -> Result<(bool, String)> {
    let started = Instant::now();
    let sp = holder(0.0);
    let opts = RunOptions {
        cadence: LogCadence::Every,
        ..sp.options()
    };
    let report = run(&sp.problem, 100_000, &opts)?;
    let d = report.diameter;
    let mut worst = 0.0f64;
    let mut violations = 0;
    for row in report.rows.iter().filter(|r| r.k >= 11) {
        let bound = lemma2_bound(row.k - 1, d, 0.0, 2.0);
        worst = worst.max(row.l / bound);
        if row.l > bound {
            violations += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Ok((
        violations == 0 && secs < 5.0,
        format!("{violations} violations, max L/bound = {worst:.4}, {secs:.2}s"),
    ))
}

fn rate_bound_dominance() -> Result<(bool, String)> {
    let checkpoints = vec![100, 1_000, 10_000];
    let mut cases: Vec<(VIProblem, Option<Vec<f64>>)> = games().into_iter().map(|p| (p, None)).collect();
    for nu in [0.0, 0.5, 1.0] {
        let sp = holder(nu);
        cases.push((sp.problem, sp.start));
    }
    let mut ok = true;
    let mut worst = 0.0f64;
    for (p, start) in &cases {
        let h = p.holder().expect("declared");
        let opts = RunOptions {
            start: start.clone(),
            checkpoints: checkpoints.clone(),
            record_averages: true,
            ..RunOptions::default()
        };
        let report = run(p, 10_000, &opts)?;
        for &k in &checkpoints {
            let w = report.average_at(k).expect("checkpoint logged");
            let gap = if p.set().dim() == 1 {
                p.exact_gap(w)?.value
            } else {
                game_gap(p, w)
            };
            let bound = theorem1_bound(k, report.diameter, h.nu, h.l_nu);
            ok &= gap <= bound;
            worst = worst.max(gap / bound);
        }
    }
    Ok((
        ok,
        format!("{} problems x 3 checkpoints, max gap/bound = {worst:.3e}", cases.len()),
    ))
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.ln() - my), b + dx * dx)
    });
    num / den
}

fn rate_ordering() -> Result<(bool, String)> {
    let p = skew_game();
    let opts = RunOptions {
        start: Some(SKEW_RATE_START.to_vec()),
        checkpoints: vec![1_000, 10_000],
        record_averages: true,
        ..RunOptions::default()
    };
    let report = run(&p, 10_000, &opts)?;
    let g3 = game_gap(&p, report.average_at(1_000).expect("logged"));
    let g4 = game_gap(&p, report.average_at(10_000).expect("logged"));
    let game_ok = g4 <= 3.0 * g3 / 10.0;

    let sp = holder(0.0);
    let checkpoints: Vec<u64> = (0..=30)
        .map(|i| 10f64.powf(2.0 + 0.1 * i as f64).round() as u64)
        .collect();
    let opts = RunOptions {
        checkpoints: checkpoints.clone(),
        ..sp.options()
    };
    let report = run(&sp.problem, 100_000, &opts)?;
    let points: Vec<(f64, f64)> = checkpoints
        .iter()
        .map(|&k| (k as f64, report.row(k).expect("logged").certificate))
        .collect();
    let slope = log_log_slope(&points);
    let sign_ok = (slope + 0.5).abs() <= 3f64.ln() / 1000f64.ln();
    Ok((
        game_ok && sign_ok,
        format!("game gap 1e3 {g3:.3e} -> 1e4 {g4:.3e}; sign certificate slope {slope:.4}"),
    ))
}

fn zero_noise_reduction() -> Result<(bool, String)> {
    let mut mismatches = 0;
    let problems = suite_problems()?;
    for sp in &problems {
        let p = &sp.problem;
        let oracle = add_gaussian_noise(p, 0.0)?;
        let d = p.diameter();
        let z0 = match &sp.start {
            Some(s) => p.set().project(&Point::new(s.clone())?)?,
            None => p.set().initial_point(),
        };
        let mut streams = SampleStreams::from_seed(7);
        let l0_det = p.operator().apply(&z0).norm();
        let l0_sto = oracle.sample(&z0, &mut streams.z).norm();
        if l0_det.to_bits() != l0_sto.to_bits() {
            mismatches += 1;
            continue;
        }
        let mut det = SolverState::new(z0.clone(), l0_det);
        let mut sto = SolverState::new(z0, l0_sto);
        for _ in 0..1_000 {
            let a = ump_iterate(&mut det, p.operator(), p.set(), d)?;
            let b = sump_iterate(&mut sto, &oracle, p.set(), d, &mut streams)?;
            let same = det.l.to_bits() == sto.l.to_bits()
                && bits_equal(&det.z, &sto.z)
                && bits_equal(&a.w, &b.w)
                && bits_equal(&det.w_sum, &sto.w_sum);
            if !same {
                mismatches += 1;
                break;
            }
        }
    }
    Ok((
        mismatches == 0,
        format!("{} problems, {mismatches} diverged", problems.len()),
    ))
}

fn bits_equal(a: &Point, b: &Point) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub const NOISE_LEVELS: [f64; 3] = [0.01, 0.1, 1.0];
pub const NOISE_CHECKPOINTS: [u64; 3] = [100, 1_000, 10_000];

/// Per noise level and checkpoint: mean `L` one iteration later, the
/// lemma bound, mean gap with its standard error, and the theorem bound.
struct NoisyRow {
    sigma: f64,
    k: u64,
    mean_l: f64,
    l_bound: f64,
    mean_gap: f64,
    stderr: f64,
    gap_bound: f64,
}

fn noisy_game_rows() -> Result<Vec<NoisyRow>> {
    let p = skew_game();
    let h = p.holder().expect("declared");
    let seeds: Vec<u64> = (1..=20).collect();
    let checkpoints: Vec<u64> = NOISE_CHECKPOINTS.iter().flat_map(|&k| [k, k + 1]).collect();
    let opts = RunOptions {
        checkpoints,
        record_averages: true,
        ..RunOptions::default()
    };
    let mut rows = Vec::new();
    for sigma in NOISE_LEVELS {
        let oracle = add_gaussian_noise(&p, sigma)?;
        let runs = run_seeds(&p, &oracle, 10_001, &seeds, &opts)?;
        let d = runs[0].report.diameter;
        let l0 = runs.iter().map(|r| r.report.l0).sum::<f64>() / runs.len() as f64;
        for k in NOISE_CHECKPOINTS {
            let ls: Vec<f64> = runs.iter().map(|r| r.report.row(k + 1).expect("logged").l).collect();
            let gaps: Vec<f64> = runs
                .iter()
                .map(|r| game_gap(&p, r.report.average_at(k).expect("logged")))
                .collect();
            let (mean_gap, stderr) = mean_and_stderr(&gaps);
            rows.push(NoisyRow {
                sigma,
                k,
                mean_l: ls.iter().sum::<f64>() / ls.len() as f64,
                l_bound: lemma3_bound(k, d, h.nu, h.l_nu, sigma, l0),
                mean_gap,
                stderr,
                gap_bound: theorem2_bound(k, d, h.nu, h.l_nu, sigma, l0),
            });
        }
    }
    Ok(rows)
}

fn stochastic_step_bound() -> Result<(bool, String)> {
    let started = Instant::now();
    let rows = noisy_game_rows()?;
    let ok = rows.iter().all(|r| r.mean_l <= r.l_bound);
    let worst = rows.iter().map(|r| r.mean_l / r.l_bound).fold(0.0, f64::max);
    let secs = started.elapsed().as_secs_f64();
    Ok((
        ok && secs < 120.0,
        format!("{} cases, max mean L/bound = {worst:.3}, {secs:.2}s", rows.len()),
    ))
}

fn stochastic_gap_bound() -> Result<(bool, String)> {
    let rows = noisy_game_rows()?;
    let ok = rows.iter().all(|r| r.mean_gap <= r.gap_bound + 2.0 * r.stderr);
    let worst = rows
        .iter()
        .map(|r| r.mean_gap / (r.gap_bound + 2.0 * r.stderr))
        .fold(0.0, f64::max);
    let detail = rows
        .iter()
        .filter(|r| r.k == 10_000)
        .map(|r| format!("sigma {} gap {:.2e}", r.sigma, r.mean_gap))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, format!("max gap/(bound + 2se) = {worst:.3}; {detail}")))
}

fn random_set(rng: &mut ChaCha8Rng) -> Result<FeasibleSet> {
    let n = rng.random_range(1..=3usize);
    match rng.random_range(0..3) {
        0 => {
            let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
            let upper = lower.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
            FeasibleSet::new_box(lower, upper)
        }
        1 => FeasibleSet::ball(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rng.random_range(0.2..2.0),
        ),
        _ => FeasibleSet::simplex(n.max(2)),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Point {
    Point::from_vec(
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                scale * z
            })
            .collect(),
    )
}

fn oracle_cross_validation() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);

    let mut proj_err = 0.0f64;
    for _ in 0..1_000 {
        let set = FeasibleSet::simplex(rng.random_range(2..=3))?;
        let y = gaussian(&mut rng, set.dim(), 2.0);
        proj_err = proj_err.max(set.project(&y)?.max_abs_diff(&project_bruteforce(&y, &set)?));
    }

    let mut gap_err = 0.0f64;
    for _ in 0..1_000 {
        let (m, n) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..=1.0));
        let set = FeasibleSet::product(vec![FeasibleSet::simplex(m)?, FeasibleSet::simplex(n)?])?;
        let x = set.sample(&mut rng);
        let closed = gap_matrix_game(&a, &x[..m], &x[m..])?.value;
        gap_err = gap_err.max((closed - game_gap_vertices(&a, &x[..m], &x[m..])).abs());
    }

    let mut prox_err = 0.0f64;
    for _ in 0..1_000 {
        let set = random_set(&mut rng)?;
        let z = set.sample(&mut rng);
        let g = gaussian(&mut rng, set.dim(), 2.0);
        let l = log_uniform(&mut rng, -1.0, 1.0);
        prox_err = prox_err.max(prox_step(&z, &g, l, &set)?.max_abs_diff(&prox_bruteforce(&z, &g, l, &set)?));
    }

    Ok((
        proj_err <= 1e-4 && gap_err <= 1e-12 && prox_err <= 1e-4,
        format!("projection {proj_err:.1e}, game gap {gap_err:.1e}, prox {prox_err:.1e}"),
    ))
}

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("vibench-{tag}-{}-{n}", std::process::id()))
}

/// Configs used by the reproducibility check.
pub fn reproducibility_configs() -> Vec<ExperimentConfig> {
    let game = ProblemDescription {
        label: Some("skew_2x2".into()),
        spec: ProblemSpec::MatrixGame { a: skew_matrix() },
        hide_constants: false,
        declared: None,
    };
    let base = ExperimentConfig {
        problem_spec: game,
        solver: SolverKind::Ump,
        iterations: 5_000,
        seeds: vec![],
        sigma: 0.0,
        log_cadence: LogCadence::default(),
        output_dir: None,
        l0_override: None,
        d_override: None,
        start: None,
        checkpoints: vec![],
    };
    let stochastic = ExperimentConfig {
        solver: SolverKind::UmpStochastic,
        seeds: vec![3, 1, 4],
        sigma: 0.1,
        ..base.clone()
    };
    let sign = ExperimentConfig {
        problem_spec: ProblemDescription {
            label: None,
            spec: ProblemSpec::Holder1d { nu: 0.0 },
            hide_constants: false,
            declared: None,
        },
        start: Some(vec![HOLDER_START]),
        ..base.clone()
    };
    vec![base, stochastic, sign]
}

fn reproducible_output() -> Result<(bool, String)> {
    let mut identical = 0;
    let configs = reproducibility_configs();
    for cfg in &configs {
        let dirs = [scratch_dir("repro"), scratch_dir("repro")];
        let mut bytes = Vec::new();
        for dir in &dirs {
            let outcome = run_experiment(cfg, dir);
            let data = fs::read(dir.join(TRAJECTORY_FILE));
            let _ = fs::remove_dir_all(dir);
            if let Err(e) = outcome {
                return Ok((false, format!("run failed: {e}")));
            }
            bytes.push(data?);
        }
        if bytes[0] == bytes[1] && !bytes[0].is_empty() {
            identical += 1;
        }
    }
    Ok((
        identical == configs.len(),
        format!("{identical}/{} configs byte-identical", configs.len()),
    ))
}
