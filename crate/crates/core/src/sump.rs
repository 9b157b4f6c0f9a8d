//! Stochastic universal mirror-prox method.
//!
//! Identical to the deterministic iteration except that every operator value
//! is a fresh oracle sample: one at `z_k` for the extrapolation step, and one
//! at `w_k` that is reused for both the correction step and the `L` update.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::{check_finite, RandomState, StochasticOracle};
use crate::problems::VIProblem;
use crate::set::FeasibleSet;
use crate::ump::{
    mirror_prox_step, resolve_diameter, resolve_l0, resolve_start, Recorder, RunOptions, RunReport, SolverKind,
    SolverState, StepRecord,
};

/// Independent random streams derived from one seed: samples at `z` points
/// and samples at `w` points never share a stream.
#[derive(Clone, Debug)]
pub struct SampleStreams {
    pub z: RandomState,
    pub w: RandomState,
}

impl SampleStreams {
    pub fn from_seed(seed: u64) -> Self {
        let mut z = ChaCha8Rng::seed_from_u64(seed);
        let mut w = z.clone();
        z.set_stream(1);
        w.set_stream(2);
        SampleStreams { z, w }
    }
}

/// One stochastic iteration; draws exactly two oracle samples.
pub fn sump_iterate(
    state: &mut SolverState,
    oracle: &dyn StochasticOracle,
    set: &FeasibleSet,
    d: f64,
    streams: &mut SampleStreams,
) -> Result<StepRecord> {
    let iteration = state.k;
    let g_z = check_finite(oracle.sample(&state.z, &mut streams.z), &state.z, iteration)?;
    let w_stream = &mut streams.w;
    mirror_prox_step(
        state,
        &g_z,
        |w| check_finite(oracle.sample(w, w_stream), w, iteration),
        set,
        d,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticRunReport {
    #[serde(flatten)]
    pub report: RunReport,
    pub seed: u64,
    /// Oracle queries, `2·iterations + 1` unless `L_0` was overridden.
    pub sample_count: u64,
    pub sigma_used: f64,
}

/// Runs the stochastic method with the given oracle over `set`.
pub fn solve_stochastic(
    oracle: &dyn StochasticOracle,
    set: &FeasibleSet,
    iterations: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<StochasticRunReport> {
    if iterations == 0 {
        return Err(invalid("iterations must be at least 1"));
    }
    if oracle.dim() != set.dim() {
        return Err(invalid(format!(
            "oracle dimension {} does not match set dimension {}",
            oracle.dim(),
            set.dim()
        )));
    }
    let started = Instant::now();
    let d = resolve_diameter(set, opts.d_override)?;
    let z0 = resolve_start(set, opts.start.as_deref())?;
    let mut streams = SampleStreams::from_seed(seed);
    let mut warnings = Vec::new();
    let mut samples = 0u64;
    let l0 = match opts.l0_override {
        Some(_) => resolve_l0(0.0, opts.l0_override, d, &mut warnings)?,
        None => {
            samples += 1;
            let g0 = check_finite(oracle.sample(&z0, &mut streams.z), &z0, 0)?;
            resolve_l0(g0.norm(), None, d, &mut warnings)?
        }
    };

    let mut state = SolverState::new(z0, l0);
    let mut recorder = Recorder::new(opts, iterations, d);
    for _ in 0..iterations {
        sump_iterate(&mut state, oracle, set, d, &mut streams)?;
        samples += 2;
        recorder.observe(&state);
    }

    let report = recorder.finish(
        SolverKind::UmpStochastic,
        state,
        l0,
        samples,
        started.elapsed().as_secs_f64(),
        warnings,
    );
    Ok(StochasticRunReport {
        report,
        seed,
        sample_count: samples,
        sigma_used: oracle.sigma(),
    })
}

/// Runs the stochastic method on a problem with the given oracle.
pub fn run_stochastic(
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    iterations: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<StochasticRunReport> {
    solve_stochastic(oracle, problem.set(), iterations, seed, opts)
}

/// Runs every seed in parallel; results come back in seed order, and a
/// failure is tagged with its seed.
pub fn run_seeds(
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    iterations: u64,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<Vec<StochasticRunReport>> {
    seeds
        .par_iter()
        .map(|&seed| {
            run_stochastic(problem, oracle, iterations, seed, opts).map_err(|e| Error::Seed {
                seed,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Bound on the expected gap:
/// `32(D²/8k)^{(1+ν)/2}L_ν + 32Dσ/√(8k) + 2D²L_0/k`.
pub fn theorem2_bound(k: u64, d: f64, nu: f64, l_nu: f64, sigma: f64, l0: f64) -> f64 {
    let k = k as f64;
    32.0 * (d * d / (8.0 * k)).powf((1.0 + nu) / 2.0) * l_nu
        + 32.0 * d / (8.0 * k).sqrt() * sigma
        + 2.0 * d * d * l0 / k
}

/// Bound on the expected step parameter:
/// `2(8k/D²)^{(1−ν)/2}L_ν + √(8k)σ/D + L_0`.
pub fn lemma3_bound(k: u64, d: f64, nu: f64, l_nu: f64, sigma: f64, l0: f64) -> f64 {
    let k = k as f64;
    2.0 * (8.0 * k / (d * d)).powf((1.0 - nu) / 2.0) * l_nu + (8.0 * k).sqrt() / d * sigma + l0
}

/// Monte Carlo estimate of the expected gap of `ŵ_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub gaps: Vec<f64>,
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs one stochastic run per seed and averages the exact gap of each `ŵ`.
pub fn mean_gap_estimate(
    problem: &VIProblem,
    oracle: &dyn StochasticOracle,
    iterations: u64,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<GapEstimate> {
    if seeds.len() < 2 {
        return Err(invalid("at least two seeds are required"));
    }
    if !problem.has_exact_gap() {
        return Err(Error::Unsupported(format!(
            "problem '{}' has no exact gap oracle",
            problem.label()
        )));
    }
    let reports = run_seeds(problem, oracle, iterations, seeds, opts)?;
    let gaps = reports
        .iter()
        .map(|r| {
            problem
                .exact_gap(&r.report.w_hat)
                .map(|g| g.value)
                .map_err(|e| Error::Seed {
                    seed: r.seed,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_and_stderr(&gaps);
    Ok(GapEstimate { mean, stderr, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::Point;
    use crate::problems::{add_gaussian_noise, make_holder_1d, make_matrix_game};
    use crate::ump::{run, ump_iterate};

    #[test]
    fn bound_arithmetic() {
        let b = theorem2_bound(8, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((b - 4.75).abs() < 1e-14);
        // zero noise and vanishing L0 leaves the Hölder term alone
        let t = theorem2_bound(50, 1.3, 0.5, 2.0, 0.0, 0.0);
        let expected = 32.0 * (1.69f64 / 400.0).powf(0.75) * 2.0;
        assert!((t - expected).abs() < 1e-14);

        let l = lemma3_bound(10, 2.0, 1.0, 3.0, 0.5, 0.7);
        assert!((l - (6.0 + 80f64.sqrt() * 0.5 / 2.0 + 0.7)).abs() < 1e-14);
        let l = lemma3_bound(10, 2.0, 0.3, 3.0, 0.0, 0.7);
        let l2 = crate::ump::lemma2_bound(10, 2.0, 0.3, 3.0);
        assert!((l - (2.0 * l2 + 0.7)).abs() < 1e-14);
    }

    #[test]
    fn zero_noise_matches_deterministic_steps() {
        let problem = make_matrix_game(vec![vec![0.5, -1.0, 0.2], vec![0.3, 0.8, -0.6]]).unwrap();
        let oracle = add_gaussian_noise(&problem, 0.0).unwrap();
        let set = problem.set();
        let d = set.diameter();
        let z0 = set.initial_point();
        let l0 = problem.operator().apply(&z0).norm();
        let mut det = SolverState::new(z0.clone(), l0);
        let mut sto = SolverState::new(z0, l0);
        let mut streams = SampleStreams::from_seed(11);
        for _ in 0..200 {
            ump_iterate(&mut det, problem.operator(), set, d).unwrap();
            sump_iterate(&mut sto, &oracle, set, d, &mut streams).unwrap();
            assert_eq!(det, sto);
        }
    }

    #[test]
    fn single_iteration_zero_noise_matches_run() {
        let problem = make_holder_1d(0.5).unwrap();
        let oracle = add_gaussian_noise(&problem, 0.0).unwrap();
        let opts = RunOptions {
            start: Some(vec![0.7]),
            ..Default::default()
        };
        let a = run(&problem, 1, &opts).unwrap();
        let b = run_stochastic(&problem, &oracle, 1, 3, &opts).unwrap();
        assert_eq!(a.rows, b.report.rows);
        assert_eq!(a.w_hat, b.report.w_hat);
        assert_eq!(b.sample_count, 3);
    }

    #[test]
    fn seeds_are_deterministic() {
        let problem = make_matrix_game(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let oracle = add_gaussian_noise(&problem, 0.5).unwrap();
        let opts = RunOptions::default();
        let a = run_stochastic(&problem, &oracle, 100, 42, &opts).unwrap();
        let b = run_stochastic(&problem, &oracle, 100, 42, &opts).unwrap();
        let c = run_stochastic(&problem, &oracle, 100, 43, &opts).unwrap();
        assert_eq!(a.report.rows, b.report.rows);
        assert_eq!(a.report.w_hat, b.report.w_hat);
        assert_ne!(a.report.rows, c.report.rows);
        assert_eq!(a.sample_count, 201);
        assert_eq!(a.sigma_used, 0.5);
        // per-path monotonicity of L
        let ls = a.report.l_trajectory();
        assert!(ls.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn streams_are_disjoint() {
        use rand::RngCore;
        let mut s = SampleStreams::from_seed(9);
        let a: Vec<u64> = (0..16).map(|_| s.z.next_u64()).collect();
        let b: Vec<u64> = (0..16).map(|_| s.w.next_u64()).collect();
        assert!(a.iter().all(|x| !b.contains(x)));
    }

    #[test]
    fn mean_gap_estimate_zero_noise() {
        let problem = make_matrix_game(vec![vec![0.5, -1.0], vec![0.3, 0.8]]).unwrap();
        let oracle = add_gaussian_noise(&problem, 0.0).unwrap();
        let opts = RunOptions::default();
        let est = mean_gap_estimate(&problem, &oracle, 200, &[1, 2, 3], &opts).unwrap();
        let det = run(&problem, 200, &opts).unwrap();
        let gap = problem.exact_gap(&det.w_hat).unwrap().value;
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.mean, gap);
        assert!(mean_gap_estimate(&problem, &oracle, 10, &[1], &opts).is_err());
    }

    #[test]
    fn failing_seed_is_tagged() {
        use crate::operator::{FnOperator, Operator};
        struct Bad(FnOperator);
        impl StochasticOracle for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn sample(&self, _x: &Point, _rng: &mut RandomState) -> Point {
                Point::from_vec(vec![f64::INFINITY])
            }
            fn mean_operator(&self) -> &dyn Operator {
                &self.0
            }
            fn sigma(&self) -> f64 {
                0.0
            }
        }
        let problem = make_holder_1d(1.0).unwrap();
        let bad = Bad(FnOperator::new(1, |x| x.clone()));
        let err = run_seeds(&problem, &bad, 5, &[7, 8], &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Seed { seed: 7, .. }));
    }
}
