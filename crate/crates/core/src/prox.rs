//! Euclidean prox step shared by both solvers.

use crate::error::{invalid, Result};
use crate::point::Point;
use crate::set::FeasibleSet;

/// Minimiser over `set` of `⟨g_val, x − z⟩ + (l/2)‖z − x‖²`.
///
/// Completing the square turns the subproblem into the projection of
/// `z − g_val / l`.
pub fn prox_step(z: &Point, g_val: &Point, l: f64, set: &FeasibleSet) -> Result<Point> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("prox parameter must be positive and finite, got {l}")));
    }
    if z.dim() != g_val.dim() {
        return Err(invalid(format!(
            "dimension mismatch: z has {}, g has {}",
            z.dim(),
            g_val.dim()
        )));
    }
    set.project(&z.axpy(-1.0 / l, g_val))
}

/// The prox subproblem objective `⟨g_val, x − z⟩ + (l/2)‖z − x‖²`.
pub fn prox_objective(x: &Point, z: &Point, g_val: &Point, l: f64) -> f64 {
    g_val.dot(&x.sub(z)) + 0.5 * l * z.dist_sq(x)
}
