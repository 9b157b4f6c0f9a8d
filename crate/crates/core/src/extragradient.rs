//! Classic fixed-step extragradient baseline.

use std::time::Instant;

use crate::error::{invalid, Result};
use crate::operator::{evaluate, Operator};
use crate::problems::VIProblem;
use crate::prox::prox_step;
use crate::ump::{resolve_diameter, resolve_start, Recorder, RunOptions, RunReport, SolverKind, SolverState};

/// Extragradient with constant `step`:
/// `w_k = P(z_k − γ g(z_k))`, `z_{k+1} = P(z_k − γ g(w_k))`.
///
/// Rows report `L = 1/γ` and the classic certificate `D²/(2γk)`, valid for
/// `γ ≤ 1/L₁` on Lipschitz monotone operators.
pub fn extragradient_fixed(problem: &VIProblem, iterations: u64, step: f64, opts: &RunOptions) -> Result<RunReport> {
    solve_extragradient(problem.operator(), problem.set(), iterations, step, opts)
}

pub fn solve_extragradient(
    op: &dyn Operator,
    set: &crate::set::FeasibleSet,
    iterations: u64,
    step: f64,
    opts: &RunOptions,
) -> Result<RunReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step must be positive, got {step}")));
    }
    if iterations == 0 {
        return Err(invalid("iterations must be at least 1"));
    }
    let started = Instant::now();
    let d = resolve_diameter(set, opts.d_override)?;
    let l = 1.0 / step;
    let mut state = SolverState::new(resolve_start(set, opts.start.as_deref())?, l);
    let mut recorder = Recorder::new(opts, iterations, d);
    for _ in 0..iterations {
        let k = state.k;
        let g_z = evaluate(op, &state.z, k)?;
        let w = prox_step(&state.z, &g_z, l, set)?;
        let g_w = evaluate(op, &w, k)?;
        state.z = prox_step(&state.z, &g_w, l, set)?;
        state.w_sum.add_assign(&w);
        state.k += 1;
        // D²/(2γk) = 2D²·(L/4)/k
        recorder.observe_with(&state, l / 4.0);
    }
    let mut report = recorder.finish(
        SolverKind::ExtragradientFixed,
        state,
        l,
        2 * iterations,
        started.elapsed().as_secs_f64(),
        Vec::new(),
    );
    for row in &mut report.rows {
        row.l = l;
    }
    Ok(report)
}
