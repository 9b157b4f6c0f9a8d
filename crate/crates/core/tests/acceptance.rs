//! Acceptance suite: eleven criteria, one PASS/FAIL line each.
//!
//! Every reference value is computed here from scratch (vertex enumeration,
//! face enumeration, closed-form gap suprema, the bound formulas) rather
//! than through the library's own gap or bound helpers.
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use umprox::gap::gap_matrix_game;
use umprox::problems::{add_gaussian_noise, make_holder_1d, VIProblem};
use umprox::prox::prox_step;
use umprox::set::FeasibleSet;
use umprox::suite::{random_game, skew_game, suite_problems, RANDOM_GAME_SEEDS, SKEW_RATE_START};
use umprox::sump::{run_seeds, solve_stochastic};
use umprox::ump::{l_update, run, solve, LogCadence, RunOptions};
use umprox::Point;

const L_UPDATE_SAMPLES: usize = 100_000;
const L_UPDATE_RESIDUAL: f64 = 1e-10;
const L_UPDATE_SECONDS: f64 = 1.0;
const CERTIFICATE_ITERS: u64 = 10_000;
const CERTIFICATE_SECONDS: f64 = 10.0;
const LIPSCHITZ_ITERS: u64 = 10_000;
const LIPSCHITZ_REL_TOL: f64 = 1e-9;
const SIGN_ITERS: u64 = 100_000;
const SIGN_FROM_K: u64 = 10;
const SIGN_SECONDS: f64 = 5.0;
const RATE_CHECKPOINTS: [u64; 3] = [100, 1_000, 10_000];
const GAME_DECAY_FACTOR: f64 = 0.3;
const SLOPE_TARGET: f64 = -0.5;
const ZERO_NOISE_ITERS: u64 = 1_000;
const NOISE_SEEDS: u64 = 20;
const NOISE_LEVELS: [f64; 3] = [0.01, 0.1, 1.0];
const NOISE_SECONDS: f64 = 120.0;
const CROSS_CHECK_INSTANCES: usize = 1_000;
const PROJECTION_TOL: f64 = 1e-4;
const GAME_GAP_TOL: f64 = 1e-12;
const PROX_TOL: f64 = 1e-4;
const HOLDER_START: f64 = 0.7;

type Outcome = (bool, String);
type Check = fn() -> umprox::Result<Outcome>;

// ---------------------------------------------------------------------------
// reference oracles

/// Restricted gap of `min_u max_v uᵀAv` at `(u, v)`. The gap function is
/// linear in the comparison point, so the vertices of `Δ_m × Δ_n` suffice.
fn game_gap(a: &[Vec<f64>], u: &[f64], v: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for i in 0..a.len() {
        for j in 0..a[0].len() {
            let mut val = 0.0;
            for (r, row) in a.iter().enumerate() {
                val += row[j] * (u[r] - f64::from(u8::from(r == i)));
            }
            for (c, &vc) in v.iter().enumerate() {
                val -= a[i][c] * (vc - f64::from(u8::from(c == j)));
            }
            best = best.max(val);
        }
    }
    best
}

fn skew() -> Vec<Vec<f64>> {
    vec![vec![0.0, 1.0], vec![-1.0, 0.0]]
}

/// Same generator and seed convention as the benchmark's random games.
fn random_matrix(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

fn game_gap_at(a: &[Vec<f64>], w: &Point) -> f64 {
    let m = a.len();
    game_gap(a, &w[..m], &w[m..])
}

/// `sup_{y ∈ [−1,1]} sign(y)|y|^ν (x − y)`, taking the larger of a grid scan
/// and the stationary-point value `y = ν|x|/(1+ν)` (or `y → 0⁺` when ν = 0).
fn holder_gap(nu: f64, x: f64) -> f64 {
    let field = |y: f64| if y == 0.0 { 0.0 } else { y.signum() * y.abs().powf(nu) };
    let n = 200_000;
    let grid = (0..=n)
        .map(|i| -1.0 + 2.0 * i as f64 / n as f64)
        .map(|y| field(y) * (x - y))
        .fold(f64::NEG_INFINITY, f64::max);
    let r = x.abs();
    let analytic = if nu == 0.0 {
        r
    } else {
        (nu * r / (1.0 + nu)).powf(nu) * r / (1.0 + nu)
    };
    grid.max(analytic)
}

fn lemma2(k: u64, d: f64, nu: f64, l_nu: f64) -> f64 {
    (8.0 * k as f64 / (d * d)).powf((1.0 - nu) / 2.0) * l_nu
}

fn theorem1(k: u64, d: f64, nu: f64, l_nu: f64) -> f64 {
    16.0 * l_nu * d.powf(1.0 + nu) / (8.0 * k as f64).powf((1.0 + nu) / 2.0)
}

fn lemma3(k: u64, d: f64, nu: f64, l_nu: f64, sigma: f64, l0: f64) -> f64 {
    let k8 = 8.0 * k as f64;
    2.0 * (k8 / (d * d)).powf((1.0 - nu) / 2.0) * l_nu + k8.sqrt() * sigma / d + l0
}

fn theorem2(k: u64, d: f64, nu: f64, l_nu: f64, sigma: f64, l0: f64) -> f64 {
    let k8 = 8.0 * k as f64;
    32.0 * (d * d / k8).powf((1.0 + nu) / 2.0) * l_nu + 32.0 * d * sigma / k8.sqrt() + 2.0 * d * d * l0 / k as f64
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Minimiser of `½‖x − y‖²` over the simplex by enumerating supports.
fn simplex_projection(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for support in 1..(1usize << n) {
        let idx: Vec<usize> = (0..n).filter(|i| support >> i & 1 == 1).collect();
        let shift = (idx.iter().map(|&i| y[i]).sum::<f64>() - 1.0) / idx.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &idx {
            x[i] = y[i] - shift;
        }
        if x.iter().any(|&v| v < 0.0) {
            continue;
        }
        let obj: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    best.expect("some support is feasible").1
}

/// Minimiser of `½‖x − y‖²` over a box by enumerating faces.
fn box_projection(y: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for face in 0..3usize.pow(n as u32) {
        let mut rem = face;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let choice = rem % 3;
                rem /= 3;
                match choice {
                    0 => lower[i],
                    1 => upper[i],
                    _ => y[i],
                }
            })
            .collect();
        if x.iter().enumerate().any(|(i, &v)| v < lower[i] || v > upper[i]) {
            continue;
        }
        let obj: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, x));
        }
    }
    best.expect("the clamped point is feasible").1
}

/// Minimiser of `½‖x − y‖²` over a ball: the multiplier λ of the constraint
/// gives `x = (y + λc)/(1 + λ)`, found by bisection on `‖x − c‖ = r`.
fn ball_projection(y: &[f64], c: &[f64], r: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { y.iter().zip(c).map(|(yi, ci)| (yi + lam * ci) / (1.0 + lam)).collect() };
    let dist = |x: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if dist(y) <= r {
        return y.to_vec();
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while dist(&at(hi)) > r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(&at(mid)) > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// `argmin ⟨g, x⟩ + (L/2)‖x − z‖²` over the set, via the completed square.
fn prox_reference(z: &[f64], g: &[f64], l: f64, set: &FeasibleSet) -> Vec<f64> {
    let y: Vec<f64> = z.iter().zip(g).map(|(zi, gi)| zi - gi / l).collect();
    match set {
        FeasibleSet::Box { lower, upper } => box_projection(&y, lower, upper),
        FeasibleSet::Ball { center, radius } => ball_projection(&y, center, *radius),
        FeasibleSet::Simplex { .. } => simplex_projection(&y),
        FeasibleSet::Product { .. } => unreachable!("not generated"),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0.ln()).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
    let den: f64 = points.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
    num / den
}

fn games() -> Vec<(VIProblem, Vec<Vec<f64>>)> {
    let mut out = vec![(skew_game(), skew())];
    out.extend(RANDOM_GAME_SEEDS.iter().map(|&s| (random_game(s), random_matrix(s))));
    out
}

fn holder_options() -> RunOptions {
    RunOptions {
        start: Some(vec![HOLDER_START]),
        ..RunOptions::default()
    }
}

// ---------------------------------------------------------------------------
// criteria

fn l_update_identity() -> umprox::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let tuples: Vec<[f64; 4]> = (0..L_UPDATE_SAMPLES)
        .map(|_| {
            let l = 10f64.powf(rng.random_range(-4.0..4.0));
            let inner = rng.random_range(-10.0..10.0) * 10f64.powf(rng.random_range(-4.0..1.0));
            let dz = if rng.random_bool(0.1) {
                0.0
            } else {
                10f64.powf(rng.random_range(-8.0..2.0))
            };
            let d = 10f64.powf(rng.random_range(-3.0..3.0));
            [l, inner, dz, d]
        })
        .collect();
    let started = Instant::now();
    let mut worst = 0.0f64;
    for &[l, inner, dz, d] in &tuples {
        let next = l_update(l, inner, dz, d)?;
        let residual = ((next - l) * d * d / 2.0 - (inner - next * dz / 2.0).max(0.0)).abs();
        worst = worst.max(residual / next.max(1.0));
    }
    let secs = started.elapsed().as_secs_f64();
    Ok((
        worst <= L_UPDATE_RESIDUAL && secs < L_UPDATE_SECONDS,
        format!("max residual/max(1,L) {worst:.2e} in {secs:.3}s"),
    ))
}

fn certificate_dominance() -> umprox::Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, a) in games() {
        let started = Instant::now();
        let opts = RunOptions {
            record_averages: true,
            ..RunOptions::default()
        };
        let report = run(&p, CERTIFICATE_ITERS, &opts)?;
        let violations = report
            .rows
            .iter()
            .zip(&report.averages)
            .filter(|(row, w)| game_gap_at(&a, w) > row.certificate)
            .count();
        let secs = started.elapsed().as_secs_f64();
        ok &=
            violations == 0 && secs < CERTIFICATE_SECONDS && report.rows.last().map(|r| r.k) == Some(CERTIFICATE_ITERS);
        parts.push(format!(
            "{}: {violations}/{} ({secs:.2}s)",
            p.label(),
            report.rows.len()
        ));
    }
    Ok((ok, parts.join(", ")))
}

fn step_bound_lipschitz() -> umprox::Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for sp in suite_problems()?.into_iter().filter(|sp| sp.is_lipschitz()) {
        let l1 = sp.problem.known_l().expect("declared");
        let opts = RunOptions {
            cadence: LogCadence::Every,
            ..sp.options()
        };
        let report = run(&sp.problem, LIPSCHITZ_ITERS, &opts)?;
        let max_l = report.rows.iter().map(|r| r.l).fold(report.l0, f64::max);
        let within = max_l <= l1 * (1.0 + LIPSCHITZ_REL_TOL);
        ok &= within;
        if !within {
            let first = report
                .rows
                .iter()
                .find(|r| r.l > l1 * (1.0 + LIPSCHITZ_REL_TOL))
                .expect("exceeds");
            parts.push(format!(
                "{} L={:.6} > L1={l1:.6} from k={}",
                sp.problem.label(),
                max_l,
                first.k
            ));
        }
    }
    if parts.is_empty() {
        parts.push("no violations".into());
    }
    Ok((ok, parts.join("; ")))
}

fn step_bound_sign() -> umprox::Result<Outcome> {
    let p = make_holder_1d(0.0)?;
    let started = Instant::now();
    let opts = RunOptions {
        cadence: LogCadence::Every,
        ..holder_options()
    };
    let report = run(&p, SIGN_ITERS, &opts)?;
    let secs = started.elapsed().as_secs_f64();
    let d = 2.0;
    let mut worst = 0.0f64;
    // row j holds the parameter produced by the iteration with index j − 1
    for row in report.rows.iter().filter(|r| r.k > SIGN_FROM_K) {
        worst = worst.max(row.l / lemma2(row.k - 1, d, 0.0, 2.0));
    }
    Ok((
        worst <= 1.0 && secs < SIGN_SECONDS && report.diameter == d,
        format!("max L/bound {worst:.4} in {secs:.2}s"),
    ))
}

fn rate_bound_dominance() -> umprox::Result<Outcome> {
    let opts = |start: Option<Vec<f64>>| RunOptions {
        start,
        checkpoints: RATE_CHECKPOINTS.to_vec(),
        record_averages: true,
        ..RunOptions::default()
    };
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (p, a) in games() {
        let report = run(&p, CERTIFICATE_ITERS, &opts(None))?;
        let l1 = p.known_l().expect("declared");
        for k in RATE_CHECKPOINTS {
            let ratio = game_gap_at(&a, report.average_at(k).expect("logged")) / theorem1(k, report.diameter, 1.0, l1);
            ok &= ratio <= 1.0;
            worst = worst.max(ratio);
        }
        cases += 1;
    }
    for nu in [0.0, 0.5, 1.0] {
        let p = make_holder_1d(nu)?;
        let report = run(&p, CERTIFICATE_ITERS, &opts(Some(vec![HOLDER_START])))?;
        let l_nu = 2f64.powf(1.0 - nu);
        for k in RATE_CHECKPOINTS {
            let w = report.average_at(k).expect("logged")[0];
            let ratio = holder_gap(nu, w) / theorem1(k, 2.0, nu, l_nu);
            ok &= ratio <= 1.0;
            worst = worst.max(ratio);
        }
        cases += 1;
    }
    Ok((
        ok,
        format!(
            "{cases} problems x {} checkpoints, max gap/bound {worst:.3e}",
            RATE_CHECKPOINTS.len()
        ),
    ))
}

fn rate_ordering() -> umprox::Result<Outcome> {
    let opts = RunOptions {
        start: Some(SKEW_RATE_START.to_vec()),
        checkpoints: vec![1_000, 10_000],
        record_averages: true,
        ..RunOptions::default()
    };
    let report = run(&skew_game(), 10_000, &opts)?;
    let g3 = game_gap_at(&skew(), report.average_at(1_000).expect("logged"));
    let g4 = game_gap_at(&skew(), report.average_at(10_000).expect("logged"));
    let game_ok = g3 > 0.0 && g4 <= GAME_DECAY_FACTOR * g3;

    let ks: Vec<u64> = (0..=30)
        .map(|i| 10f64.powf(2.0 + 0.1 * f64::from(i)).round() as u64)
        .collect();
    let opts = RunOptions {
        checkpoints: ks.clone(),
        ..holder_options()
    };
    let report = run(&make_holder_1d(0.0)?, 100_000, &opts)?;
    let points: Vec<(f64, f64)> = ks
        .iter()
        .map(|&k| (k as f64, report.row(k).expect("logged").certificate))
        .collect();
    let slope = log_log_slope(&points);
    // a factor of 3 over three decades
    let slope_ok = (slope - SLOPE_TARGET).abs() <= 3f64.ln() / 1000f64.ln();
    Ok((
        game_ok && slope_ok,
        format!("game gap {g3:.3e} -> {g4:.3e}, sign certificate slope {slope:.4}"),
    ))
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn zero_noise_reduction() -> umprox::Result<Outcome> {
    let problems = suite_problems()?;
    let mut diverged = Vec::new();
    for sp in &problems {
        let p = &sp.problem;
        let opts = RunOptions {
            cadence: LogCadence::Every,
            record_averages: true,
            ..sp.options()
        };
        let det = solve(p.operator(), p.set(), ZERO_NOISE_ITERS, &opts)?;
        let oracle = add_gaussian_noise(p, 0.0)?;
        let sto = solve_stochastic(&oracle, p.set(), ZERO_NOISE_ITERS, 7, &opts)?.report;
        let same = det.l0.to_bits() == sto.l0.to_bits()
            && det.rows.len() == sto.rows.len()
            && det
                .rows
                .iter()
                .zip(&sto.rows)
                .all(|(a, b)| a.l.to_bits() == b.l.to_bits())
            && det.averages.iter().zip(&sto.averages).all(|(a, b)| bits(a) == bits(b))
            && bits(&det.z_final) == bits(&sto.z_final);
        if !same {
            diverged.push(p.label().to_string());
        }
    }
    Ok((
        diverged.is_empty(),
        format!("{} problems, {} diverged {diverged:?}", problems.len(), diverged.len()),
    ))
}

struct NoisyRow {
    sigma: f64,
    k: u64,
    mean_l: f64,
    l_bound: f64,
    mean_gap: f64,
    stderr: f64,
    gap_bound: f64,
}

fn noisy_rows() -> umprox::Result<(Vec<NoisyRow>, f64)> {
    let started = Instant::now();
    let p = skew_game();
    let a = skew();
    let l1 = 1.0;
    let seeds: Vec<u64> = (1..=NOISE_SEEDS).collect();
    let checkpoints: Vec<u64> = RATE_CHECKPOINTS.iter().flat_map(|&k| [k, k + 1]).collect();
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
        for k in RATE_CHECKPOINTS {
            let ls: Vec<f64> = runs.iter().map(|r| r.report.row(k + 1).expect("logged").l).collect();
            let gaps: Vec<f64> = runs
                .iter()
                .map(|r| game_gap_at(&a, r.report.average_at(k).expect("logged")))
                .collect();
            let (mean_gap, stderr) = mean_stderr(&gaps);
            rows.push(NoisyRow {
                sigma,
                k,
                mean_l: mean_stderr(&ls).0,
                l_bound: lemma3(k, d, 1.0, l1, sigma, l0),
                mean_gap,
                stderr,
                gap_bound: theorem2(k, d, 1.0, l1, sigma, l0),
            });
        }
    }
    Ok((rows, started.elapsed().as_secs_f64()))
}

fn stochastic_step_bound(rows: &[NoisyRow], secs: f64) -> Outcome {
    let worst = rows.iter().map(|r| r.mean_l / r.l_bound).fold(0.0, f64::max);
    (
        worst <= 1.0 && secs < NOISE_SECONDS,
        format!("{} cases, max mean L/bound {worst:.3}, {secs:.1}s", rows.len()),
    )
}

fn stochastic_gap_bound(rows: &[NoisyRow]) -> Outcome {
    let worst = rows
        .iter()
        .map(|r| r.mean_gap / (r.gap_bound + 2.0 * r.stderr))
        .fold(0.0, f64::max);
    let last: Vec<String> = rows
        .iter()
        .filter(|r| r.k == 10_000)
        .map(|r| format!("sigma {}: {:.2e}", r.sigma, r.mean_gap))
        .collect();
    (
        worst <= 1.0,
        format!("max mean gap/(bound + 2se) {worst:.3}; gap at 1e4 {}", last.join(", ")),
    )
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

fn random_set(rng: &mut ChaCha8Rng) -> umprox::Result<FeasibleSet> {
    let n = rng.random_range(1..=3usize);
    match rng.random_range(0..3) {
        0 => {
            let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
            let upper = lower.iter().map(|l| l + rng.random_range(0.05..3.0)).collect();
            FeasibleSet::new_box(lower, upper)
        }
        1 => FeasibleSet::ball(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rng.random_range(0.1..3.0),
        ),
        _ => FeasibleSet::simplex(rng.random_range(2..=3)),
    }
}

fn oracle_cross_validation() -> umprox::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(31_337);

    let mut proj = 0.0f64;
    for _ in 0..CROSS_CHECK_INSTANCES {
        let set = FeasibleSet::simplex(rng.random_range(2..=3))?;
        let y = gaussian(&mut rng, set.dim(), 3.0);
        let got = set.project(&Point::from_vec(y.clone()))?;
        proj = proj.max(max_abs_diff(&got, &simplex_projection(&y)));
    }

    let mut gap = 0.0f64;
    for _ in 0..CROSS_CHECK_INSTANCES {
        let (m, n) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let a: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let u = simplex_projection(&gaussian(&mut rng, m, 1.0));
        let v = simplex_projection(&gaussian(&mut rng, n, 1.0));
        let mat = nalgebra::DMatrix::from_fn(m, n, |i, j| a[i][j]);
        gap = gap.max((gap_matrix_game(&mat, &u, &v)?.value - game_gap(&a, &u, &v)).abs());
    }

    let mut prox = 0.0f64;
    for _ in 0..CROSS_CHECK_INSTANCES {
        let set = random_set(&mut rng)?;
        let z = set.sample(&mut rng);
        let g = gaussian(&mut rng, set.dim(), 2.0);
        let l = 10f64.powf(rng.random_range(-1.0..1.0));
        let got = prox_step(&z, &Point::from_vec(g.clone()), l, &set)?;
        prox = prox.max(max_abs_diff(&got, &prox_reference(&z, &g, l, &set)));
    }

    Ok((
        proj <= PROJECTION_TOL && gap <= GAME_GAP_TOL && prox <= PROX_TOL,
        format!("projection {proj:.1e}, game gap {gap:.1e}, prox {prox:.1e}"),
    ))
}

fn vibench_run(config: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_vibench"))
        .arg("--quiet")
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("vibench exited with {status}"));
    }
    fs::read(out.join("trajectory.csv")).map_err(|e| e.to_string())
}

fn reproducible_output() -> umprox::Result<Outcome> {
    let configs = [
        json!({ "problem_spec": { "kind": "matrix_game", "a": skew() }, "solver": "ump", "iterations": 5000 }),
        json!({
            "problem_spec": { "kind": "matrix_game", "a": random_matrix(2) },
            "solver": "ump_stochastic",
            "iterations": 5000,
            "seeds": [3, 1, 4],
            "sigma": 0.1
        }),
        json!({
            "problem_spec": { "kind": "holder1d", "nu": 0.0 },
            "solver": "ump",
            "iterations": 5000,
            "start": [HOLDER_START]
        }),
    ];
    let dir = tempfile::tempdir()?;
    let mut identical = 0;
    let mut problems = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let path = dir.path().join(format!("config{i}.json"));
        fs::write(&path, cfg.to_string())?;
        let first = vibench_run(&path, &dir.path().join(format!("a{i}")));
        let second = vibench_run(&path, &dir.path().join(format!("b{i}")));
        match (first, second) {
            (Ok(a), Ok(b)) if a == b && a.len() > 100 => identical += 1,
            (Ok(_), Ok(_)) => problems.push(format!("config {i} differs")),
            (Err(e), _) | (_, Err(e)) => problems.push(format!("config {i}: {e}")),
        }
    }
    Ok((
        identical == configs.len(),
        format!(
            "{identical}/{} configs byte-identical {}",
            configs.len(),
            problems.join("; ")
        ),
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u8, name: &str, started: Instant, result: umprox::Result<Outcome>| {
        let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name:<28} {} ({:.2}s) {detail}",
            if passed { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    };
    let single: [(u8, &str, Check); 7] = [
        (1, "L-update identity", l_update_identity),
        (2, "certificate dominance", certificate_dominance),
        (3, "step bound, Lipschitz", step_bound_lipschitz),
        (4, "step bound, sign problem", step_bound_sign),
        (5, "deterministic rate bound", rate_bound_dominance),
        (6, "rate ordering", rate_ordering),
        (7, "zero-noise reduction", zero_noise_reduction),
    ];
    for (id, name, check) in single {
        report(id, name, Instant::now(), check());
    }
    let started = Instant::now();
    match noisy_rows() {
        Ok((rows, secs)) => {
            report(
                8,
                "stochastic step bound",
                started,
                Ok(stochastic_step_bound(&rows, secs)),
            );
            report(9, "stochastic gap bound", started, Ok(stochastic_gap_bound(&rows)));
        }
        Err(e) => {
            let msg = e.to_string();
            report(8, "stochastic step bound", started, Ok((false, msg.clone())));
            report(9, "stochastic gap bound", started, Ok((false, msg)));
        }
    }
    report(10, "oracle cross-validation", Instant::now(), oracle_cross_validation());
    report(11, "reproducible output", Instant::now(), reproducible_output());

    println!("{}/11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
