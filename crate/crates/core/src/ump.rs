//! Deterministic universal mirror-prox method.
//!
//! Each iteration takes an extrapolation step from `z_k` with the operator
//! value at `z_k`, a correction step from `z_k` with the value at the
//! extrapolated point `w_k`, and then raises the step parameter `L_k` just
//! enough to keep the per-iteration progress inequality valid:
//!
//! ```text
//! L_{k+1} = L_k + max{0, (2⟨g(w_k), w_k − z_{k+1}⟩ − L_k‖z_k − z_{k+1}‖²) / (D² + ‖z_k − z_{k+1}‖²)}
//! ```
//!
//! The method never needs the Hölder exponent or constant of `g`; after `k`
//! iterations the averaged extrapolation point `ŵ_k` satisfies
//! `Gap(ŵ_k) ≤ 2D²L_k/k`, which is reported as a run-time certificate.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::{evaluate, Operator};
use crate::point::Point;
use crate::problems::VIProblem;
use crate::prox::prox_step;
use crate::set::FeasibleSet;

/// Iteration state `(z_k, L_k, Σ w_i, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub z: Point,
    pub l: f64,
    pub w_sum: Point,
    pub k: u64,
}

impl SolverState {
    pub fn new(z0: Point, l0: f64) -> Self {
        let n = z0.dim();
        SolverState {
            z: z0,
            l: l0,
            w_sum: Point::zeros(n),
            k: 0,
        }
    }

    /// Average of the completed extrapolation points, `None` before the first
    /// iteration.
    pub fn w_hat(&self) -> Option<Point> {
        (self.k > 0).then(|| self.w_sum.scale(1.0 / self.k as f64))
    }
}

/// What one iteration computed, beyond the new state.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub w: Point,
    pub l_prev: f64,
    /// `⟨g(w_k), w_k − z_{k+1}⟩`
    pub inner: f64,
    /// `‖z_k − z_{k+1}‖²`
    pub dz_sq: f64,
}

/// Closed-form step-parameter update.
///
/// Returns the `L_{k+1} ≥ L_k` solving
/// `(L_{k+1} − L_k)D²/2 = |inner − (L_{k+1}/2)·dz_sq|₊`.
pub fn l_update(l_k: f64, inner: f64, dz_sq: f64, d: f64) -> Result<f64> {
    if !(l_k.is_finite() && inner.is_finite() && dz_sq.is_finite() && d.is_finite()) {
        return Err(invalid("l_update inputs must be finite"));
    }
    if d <= 0.0 {
        return Err(invalid(format!("diameter must be positive, got {d}")));
    }
    if l_k <= 0.0 {
        return Err(invalid(format!("L_k must be positive, got {l_k}")));
    }
    if dz_sq < 0.0 {
        return Err(invalid(format!("squared step length is negative: {dz_sq}")));
    }
    let increment = (2.0 * inner - l_k * dz_sq) / (d * d + dz_sq);
    Ok(l_k + increment.max(0.0))
}

/// One iteration shared by the deterministic and stochastic drivers.
///
/// `g_z` is the operator value at `state.z`; `eval_w` evaluates at the
/// extrapolated point, and its value drives both the correction step and the
/// update of `L`. The state is only modified on success.
pub(crate) fn mirror_prox_step(
    state: &mut SolverState,
    g_z: &Point,
    eval_w: impl FnOnce(&Point) -> Result<Point>,
    set: &FeasibleSet,
    d: f64,
) -> Result<StepRecord> {
    let w = prox_step(&state.z, g_z, state.l, set)?;
    let g_w = eval_w(&w)?;
    let z_next = prox_step(&state.z, &g_w, state.l, set)?;
    let inner = g_w.dot(&w.sub(&z_next));
    let dz_sq = state.z.dist_sq(&z_next);
    if !inner.is_finite() {
        return Err(Error::Diverged {
            iteration: state.k,
            value: inner,
        });
    }
    let l_next = l_update(state.l, inner, dz_sq, d)?;
    if !l_next.is_finite() {
        return Err(Error::Diverged {
            iteration: state.k,
            value: l_next,
        });
    }

    let l_prev = state.l;
    state.w_sum.add_assign(&w);
    state.z = z_next;
    state.l = l_next;
    state.k += 1;
    Ok(StepRecord {
        w,
        l_prev,
        inner,
        dz_sq,
    })
}

/// One deterministic iteration; evaluates the operator exactly twice.
pub fn ump_iterate(state: &mut SolverState, op: &dyn Operator, set: &FeasibleSet, d: f64) -> Result<StepRecord> {
    let iteration = state.k;
    let g_z = evaluate(op, &state.z, iteration)?;
    mirror_prox_step(state, &g_z, |w| evaluate(op, w, iteration), set, d)
}

/// Which iterations are written to the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LogCadence {
    Every,
    /// Every iteration up to `full_until`, then iterations `⌈ratio^j⌉`.
    Geometric {
        full_until: u64,
        ratio: f64,
    },
}

impl Default for LogCadence {
    fn default() -> Self {
        LogCadence::Geometric {
            full_until: 1000,
            ratio: 1.1,
        }
    }
}

/// Stateful membership test for the logged iterations `1..=iterations`.
pub(crate) struct LogSchedule<'a> {
    cadence: &'a LogCadence,
    checkpoints: &'a [u64],
    last: u64,
    j: i32,
}

impl<'a> LogSchedule<'a> {
    pub(crate) fn new(cadence: &'a LogCadence, checkpoints: &'a [u64], last: u64) -> Self {
        LogSchedule {
            cadence,
            checkpoints,
            last,
            j: 0,
        }
    }

    /// Must be called with increasing `k`.
    pub(crate) fn is_logged(&mut self, k: u64) -> bool {
        if k == self.last || self.checkpoints.contains(&k) {
            return true;
        }
        match *self.cadence {
            LogCadence::Every => true,
            LogCadence::Geometric { full_until, ratio } => {
                if k <= full_until {
                    return true;
                }
                if ratio <= 1.0 {
                    return false;
                }
                while ratio.powi(self.j).ceil() < k as f64 {
                    self.j += 1;
                }
                ratio.powi(self.j).ceil() == k as f64
            }
        }
    }
}

/// Options for a solver run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Initial `L_0`; defaults to the norm of the operator at the start.
    pub l0_override: Option<f64>,
    /// Diameter used in the update and the certificates; must be at least the
    /// set's diameter.
    pub d_override: Option<f64>,
    /// Start point (projected onto the set); defaults to the projection of
    /// the origin.
    pub start: Option<Vec<f64>>,
    pub cadence: LogCadence,
    /// Extra iterations that are always logged.
    pub checkpoints: Vec<u64>,
    /// Keep `ŵ_k` for every logged row.
    pub record_averages: bool,
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    /// Completed iterations.
    pub k: u64,
    /// Step parameter after `k` iterations.
    pub l: f64,
    /// `2D²L/k`
    pub certificate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Ump,
    UmpStochastic,
    ExtragradientFixed,
}

/// Result of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub solver: SolverKind,
    pub iterations: u64,
    pub diameter: f64,
    pub l0: f64,
    pub rows: Vec<TrajectoryRow>,
    /// `ŵ_k` per row when `record_averages` was set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub averages: Vec<Point>,
    pub w_hat: Point,
    pub z_final: Point,
    pub oracle_calls: u64,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn l_trajectory(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l).collect()
    }

    pub fn certificate_trajectory(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.certificate).collect()
    }

    pub fn row(&self, k: u64) -> Option<&TrajectoryRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// `ŵ_k` at logged row `k`, if averages were recorded.
    pub fn average_at(&self, k: u64) -> Option<&Point> {
        let i = self.rows.iter().position(|r| r.k == k)?;
        self.averages.get(i)
    }
}

/// Smallest admissible `L_0`.
pub fn l_floor(d: f64) -> f64 {
    1e-12 * d.max(1.0)
}

/// Diameter to use for a run: the set's own, or a validated override.
pub fn resolve_diameter(set: &FeasibleSet, d_override: Option<f64>) -> Result<f64> {
    let computed = set.diameter();
    let d = match d_override {
        Some(d) => {
            if !(d.is_finite() && d > 0.0) {
                return Err(invalid(format!("diameter override must be positive, got {d}")));
            }
            if d < computed * (1.0 - 1e-12) {
                return Err(invalid(format!(
                    "diameter override {d} is smaller than the set diameter {computed}"
                )));
            }
            d
        }
        None => computed,
    };
    if d <= 0.0 {
        return Err(invalid("feasible set has zero diameter"));
    }
    Ok(d)
}

pub(crate) fn resolve_start(set: &FeasibleSet, start: Option<&[f64]>) -> Result<Point> {
    match start {
        Some(s) => set.project(&Point::new(s.to_vec())?),
        None => Ok(set.initial_point()),
    }
}

/// Picks `L_0` from an override or the initial operator norm, applying the
/// floor when the norm vanishes.
pub(crate) fn resolve_l0(
    norm_at_start: f64,
    l0_override: Option<f64>,
    d: f64,
    warnings: &mut Vec<String>,
) -> Result<f64> {
    if let Some(l0) = l0_override {
        if !(l0.is_finite() && l0 > 0.0) {
            return Err(invalid(format!("L0 override must be positive, got {l0}")));
        }
        return Ok(l0);
    }
    if !norm_at_start.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            value: norm_at_start,
        });
    }
    let floor = l_floor(d);
    if norm_at_start < floor {
        warnings.push(format!(
            "initial operator norm {norm_at_start:e} is below the floor; L0 set to {floor:e}"
        ));
        Ok(floor)
    } else {
        Ok(norm_at_start)
    }
}

/// Runs `iterations` deterministic iterations on `op` over `set`.
pub fn solve(op: &dyn Operator, set: &FeasibleSet, iterations: u64, opts: &RunOptions) -> Result<RunReport> {
    if iterations == 0 {
        return Err(invalid("iterations must be at least 1"));
    }
    if op.dim() != set.dim() {
        return Err(invalid(format!(
            "operator dimension {} does not match set dimension {}",
            op.dim(),
            set.dim()
        )));
    }
    let started = Instant::now();
    let d = resolve_diameter(set, opts.d_override)?;
    let z0 = resolve_start(set, opts.start.as_deref())?;
    let mut warnings = Vec::new();
    let mut calls = 0u64;
    let l0 = match opts.l0_override {
        Some(_) => resolve_l0(0.0, opts.l0_override, d, &mut warnings)?,
        None => {
            calls += 1;
            let g0 = evaluate(op, &z0, 0)?;
            resolve_l0(g0.norm(), None, d, &mut warnings)?
        }
    };

    let mut state = SolverState::new(z0, l0);
    let mut recorder = Recorder::new(opts, iterations, d);
    for _ in 0..iterations {
        ump_iterate(&mut state, op, set, d)?;
        calls += 2;
        recorder.observe(&state);
    }

    Ok(recorder.finish(
        SolverKind::Ump,
        state,
        l0,
        calls,
        started.elapsed().as_secs_f64(),
        warnings,
    ))
}

/// Runs the deterministic method on a problem.
pub fn run(problem: &VIProblem, iterations: u64, opts: &RunOptions) -> Result<RunReport> {
    solve(problem.operator(), problem.set(), iterations, opts)
}

/// Collects logged rows during a run.
pub(crate) struct Recorder<'a> {
    schedule: LogSchedule<'a>,
    record_averages: bool,
    d: f64,
    iterations: u64,
    rows: Vec<TrajectoryRow>,
    averages: Vec<Point>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(opts: &'a RunOptions, iterations: u64, d: f64) -> Self {
        Recorder {
            schedule: LogSchedule::new(&opts.cadence, &opts.checkpoints, iterations),
            record_averages: opts.record_averages,
            d,
            iterations,
            rows: Vec::new(),
            averages: Vec::new(),
        }
    }

    pub(crate) fn observe(&mut self, state: &SolverState) {
        self.observe_with(state, state.l);
    }

    /// Logs a row with an explicit certificate parameter.
    pub(crate) fn observe_with(&mut self, state: &SolverState, l: f64) {
        if self.schedule.is_logged(state.k) {
            self.rows.push(TrajectoryRow {
                k: state.k,
                l,
                certificate: certificate_bound(self.d, l, state.k),
            });
            if self.record_averages {
                self.averages.push(state.w_hat().expect("k ≥ 1"));
            }
        }
    }

    pub(crate) fn finish(
        self,
        solver: SolverKind,
        state: SolverState,
        l0: f64,
        oracle_calls: u64,
        wall_time_secs: f64,
        warnings: Vec<String>,
    ) -> RunReport {
        RunReport {
            solver,
            iterations: self.iterations,
            diameter: self.d,
            l0,
            rows: self.rows,
            averages: self.averages,
            w_hat: state.w_hat().expect("at least one iteration"),
            z_final: state.z,
            oracle_calls,
            wall_time_secs,
            warnings,
        }
    }
}

/// Run-time gap certificate `2D²L/k`.
pub fn certificate_bound(d: f64, l_next: f64, k: u64) -> f64 {
    2.0 * d * d * l_next / k as f64
}

/// Upper bound `(8k/D²)^{(1−ν)/2}·L_ν` on the step parameter.
pub fn lemma2_bound(k: u64, d: f64, nu: f64, l_nu: f64) -> f64 {
    (8.0 * k as f64 / (d * d)).powf((1.0 - nu) / 2.0) * l_nu
}

/// Bound on the step parameter after `k` iterations that also accounts for
/// the starting value `L_0`.
///
/// Each update raises `L^{p+1}` by at most `α`, with `p = (1+ν)/(1−ν)`, and
/// `2kα` is dominated by `lemma2_bound(k)^{p+1}`, so
/// `L_k ≤ (lemma2_bound(k)^{p+1}/2 + L_0^{p+1})^{1/(p+1)}`. For `ν = 1`
/// this becomes `max(L_0, L_1)`.
///
/// The estimate of `α` assumes
/// `D² + ‖z_k − z_{k+1}‖² − ‖z_k − w_k‖² − ‖z_{k+1} − w_k‖² ≥ D²/2`, which
/// can fail on early iterations, so the bound is not guaranteed; see
/// [`lipschitz_step_parameter_bound`] for one that is.
pub fn step_parameter_bound(k: u64, d: f64, nu: f64, l_nu: f64, l0: f64) -> f64 {
    if nu >= 1.0 {
        return l0.max(l_nu);
    }
    let b = lemma2_bound(k, d, nu, l_nu);
    let q = 2.0 / (1.0 - nu);
    let m = b.max(l0);
    if m == 0.0 {
        return 0.0;
    }
    // scaled to avoid overflow for ν close to 1
    m * ((b / m).powf(q) / 2.0 + (l0 / m).powf(q)).powf(1.0 / q)
}

/// Guaranteed bound `max(L_0, 2L_1)` for a Lipschitz operator.
///
/// While `L_k < L_1` an update adds at most
/// `(L_1 − L_k)(‖z_k − w_k‖² + ‖z_{k+1} − w_k‖²)/(D² + ‖z_k − z_{k+1}‖²)`,
/// and the ratio is below 2; once `L_k ≥ L_1` the parameter stops growing.
pub fn lipschitz_step_parameter_bound(l1: f64, l0: f64) -> f64 {
    l0.max(2.0 * l1)
}

/// Gap bound `16·L_ν·D^{1+ν}/(8k)^{(1+ν)/2}` for the averaged iterate.
pub fn theorem1_bound(k: u64, d: f64, nu: f64, l_nu: f64) -> f64 {
    16.0 * l_nu * d.powf(1.0 + nu) / (8.0 * k as f64).powf((1.0 + nu) / 2.0)
}

/// Iterations sufficient for an `eps`-solution:
/// `⌈(16L_ν/ε)^{2/(1+ν)}·D²/8⌉`.
pub fn theorem1_complexity(eps: f64, nu: f64, l_nu: f64, d: f64) -> Result<u64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid(format!("accuracy must be positive, got {eps}")));
    }
    Ok(((16.0 * l_nu / eps).powf(2.0 / (1.0 + nu)) * d * d / 8.0).ceil() as u64)
}
