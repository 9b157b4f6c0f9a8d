//! Restricted gap `Gap(x̂) = max_{u∈Q} ⟨g(u), x̂ − u⟩` and related
//! solution-quality measures.
//!
//! Exact values are available for bilinear matrix games (closed form) and
//! the one-dimensional Hölder family. Everything else goes through a finite
//! candidate set, which can only under-estimate the maximum, so brute-force
//! values are lower bounds.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::operator::Operator;
use crate::point::Point;
use crate::set::FeasibleSet;

/// Largest candidate set the brute-force oracles will evaluate.
pub const MAX_GRID_POINTS: usize = 4_000_000;

/// Total vertex budget for products of simplices in dimension above three.
pub const MAX_PRODUCT_VERTICES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    ClosedForm,
    VertexEnum,
    Grid,
    SuboptimalityLowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub value: f64,
    pub method: GapMethod,
    /// Maximising `u` found.
    pub witness: Point,
    /// Grid spacing for grid results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

impl GapResult {
    /// True when the value is exact rather than a lower bound.
    pub fn is_exact(&self) -> bool {
        self.method == GapMethod::ClosedForm
    }
}

fn check_on_simplex(x: &[f64], name: &str) -> Result<()> {
    let sum: f64 = x.iter().sum();
    if x.iter().any(|v| !v.is_finite() || *v < -1e-8) || (sum - 1.0).abs() > 1e-8 {
        return Err(invalid(format!("{name} is not on the probability simplex")));
    }
    Ok(())
}

/// Exact gap of `(û, v̂)` for the game field `g(u, v) = (Av, −Aᵀu)` on
/// `Δ_m × Δ_n`: `max_j (Aᵀû)_j − min_i (Av̂)_i`.
///
/// The bilinear cross terms `⟨Av, u⟩ − ⟨Aᵀu, v⟩` cancel inside the gap, so
/// the maximisation splits into two linear programs over simplices.
pub fn gap_matrix_game(a: &DMatrix<f64>, u_hat: &[f64], v_hat: &[f64]) -> Result<GapResult> {
    let (m, n) = a.shape();
    if u_hat.len() != m || v_hat.len() != n {
        return Err(invalid(format!(
            "expected strategies of length {m} and {n}, got {} and {}",
            u_hat.len(),
            v_hat.len()
        )));
    }
    check_on_simplex(u_hat, "u_hat")?;
    check_on_simplex(v_hat, "v_hat")?;
    let at_u = a.tr_mul(&DVector::from_column_slice(u_hat));
    let a_v = a * DVector::from_column_slice(v_hat);
    let (j, max_col) = argmax(at_u.iter().copied());
    let (i, min_row) = argmax(a_v.iter().map(|v| -v));
    let mut witness = vec![0.0; m + n];
    witness[i] = 1.0;
    witness[m + j] = 1.0;
    Ok(GapResult {
        value: max_col + min_row,
        method: GapMethod::ClosedForm,
        witness: Point::from_vec(witness),
        spacing: None,
    })
}

/// Exact gap on `[−1, 1]` for `g(x) = sign(x)|x|^ν`.
///
/// For `x̂ > 0` the maximiser of `u^ν(x̂ − u)` is `u = νx̂/(1+ν)`; the sign
/// field (`ν = 0`) has supremum `|x̂|`, approached as `u → 0⁺`.
pub fn gap_holder_1d(nu: f64, x_hat: f64) -> Result<GapResult> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(invalid(format!("Hölder exponent must lie in [0, 1], got {nu}")));
    }
    if !(-1.0..=1.0).contains(&x_hat) {
        return Err(invalid(format!("{x_hat} is outside [−1, 1]")));
    }
    let a = x_hat.abs();
    let ratio = nu / (1.0 + nu);
    let value = if nu == 0.0 {
        a
    } else {
        ratio.powf(nu) * a.powf(1.0 + nu) / (1.0 + nu)
    };
    Ok(GapResult {
        value,
        method: GapMethod::ClosedForm,
        witness: Point::from_vec(vec![x_hat.signum() * ratio * a]),
        spacing: None,
    })
}

/// `f(ŵ) − f*` for a convex minimisation problem with `g = ∇f`.
///
/// Convexity sandwiches it between the two merit functions:
/// the restricted gap is at most this value, and the Stampacchia residual
/// `max_y ⟨∇f(ŵ), ŵ − y⟩` is at least it.
pub fn suboptimality_lower_bound(f_value_at_w_hat: f64, f_star: f64) -> f64 {
    f_value_at_w_hat - f_star
}

struct Candidates {
    points: Vec<Point>,
    method: GapMethod,
    spacing: Option<f64>,
}

fn candidates(set: &FeasibleSet, resolution: usize) -> Result<Candidates> {
    let n = set.dim();
    if n <= 3 {
        let points = set.grid(resolution, MAX_GRID_POINTS)?;
        return Ok(Candidates {
            points,
            method: GapMethod::Grid,
            spacing: Some(grid_spacing(set, resolution)),
        });
    }
    if set.is_simplex_product() && n <= MAX_PRODUCT_VERTICES {
        let mut points = set.vertices().expect("simplex products are polytopes");
        let (method, spacing) = match set.grid(resolution, MAX_GRID_POINTS) {
            Ok(grid) => {
                points.extend(grid);
                (GapMethod::Grid, Some(grid_spacing(set, resolution)))
            }
            Err(_) => (GapMethod::VertexEnum, None),
        };
        return Ok(Candidates {
            points,
            method,
            spacing,
        });
    }
    Err(Error::Unsupported(format!(
        "brute-force gap needs dimension ≤ 3 or a product of simplices with ≤ {MAX_PRODUCT_VERTICES} vertices, got dimension {n}"
    )))
}

fn grid_spacing(set: &FeasibleSet, resolution: usize) -> f64 {
    match set {
        FeasibleSet::Box { lower, upper } => lower
            .iter()
            .zip(upper)
            .map(|(l, u)| (u - l) / (resolution - 1) as f64)
            .fold(0.0, f64::max),
        FeasibleSet::Ball { radius, .. } => 2.0 * radius / (resolution - 1) as f64,
        FeasibleSet::Simplex { .. } => 1.0 / (resolution - 1) as f64,
        FeasibleSet::Product { factors } => factors.iter().map(|f| grid_spacing(f, resolution)).fold(0.0, f64::max),
    }
}

/// Index and value of the maximum, first index on ties.
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, v)| if v > best.1 { (i, v) } else { best },
    )
}

fn par_argmax(points: &[Point], f: impl Fn(&Point) -> f64 + Sync) -> (usize, f64) {
    points.par_iter().enumerate().map(|(i, p)| (i, f(p))).reduce(
        || (usize::MAX, f64::NEG_INFINITY),
        |a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        },
    )
}

/// Lower bound on the gap by maximising `⟨g(u), ŵ − u⟩` over a grid with
/// `resolution` points per axis (plus the vertices, for simplex products).
pub fn gap_bruteforce(op: &dyn Operator, set: &FeasibleSet, w_hat: &Point, resolution: usize) -> Result<GapResult> {
    if w_hat.dim() != set.dim() || op.dim() != set.dim() {
        return Err(invalid("dimension mismatch between operator, set and point"));
    }
    let mut cands = candidates(set, resolution)?;
    if set.contains(w_hat, 1e-9) {
        // u = ŵ gives zero
        cands.points.push(w_hat.clone());
    }
    let (i, value) = par_argmax(&cands.points, |u| op.apply(u).dot(&w_hat.sub(u)));
    Ok(GapResult {
        value,
        method: cands.method,
        witness: cands.points.swap_remove(i),
        spacing: cands.spacing,
    })
}

/// `max_x ⟨g(x̂), x̂ − x⟩` over the grid; at most `ε` certifies an
/// `ε`-approximate strong solution.
pub fn stampacchia_residual(op: &dyn Operator, set: &FeasibleSet, x_hat: &Point, resolution: usize) -> Result<f64> {
    if x_hat.dim() != set.dim() || op.dim() != set.dim() {
        return Err(invalid("dimension mismatch between operator, set and point"));
    }
    let cands = candidates(set, resolution)?;
    let g = op.apply(x_hat);
    let (_, value) = par_argmax(&cands.points, |x| g.dot(&x_hat.sub(x)));
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::FnOperator;
    use crate::problems::{make_holder_1d, make_matrix_game};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(v: &[f64]) -> Point {
        Point::from_vec(v.to_vec())
    }

    /// Literal evaluation of `max_u ⟨g(u), x̂ − u⟩` over all vertex pairs.
    fn vertex_gap(a: &DMatrix<f64>, u_hat: &[f64], v_hat: &[f64]) -> f64 {
        let problem = make_matrix_game((0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()).unwrap();
        let x_hat = pt(&[u_hat, v_hat].concat());
        problem
            .set()
            .vertices()
            .unwrap()
            .iter()
            .map(|y| problem.operator().apply(y).dot(&x_hat.sub(y)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn skew_game_at_uniform() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let g = gap_matrix_game(&a, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(g.value, 1.0);
        assert_eq!(vertex_gap(&a, &[0.5, 0.5], &[0.5, 0.5]), 1.0);
        // (0,1) × (0,1) is the saddle point of this game
        assert_eq!(gap_matrix_game(&a, &[0.0, 1.0], &[0.0, 1.0]).unwrap().value, 0.0);
    }

    #[test]
    fn diagonal_game_equilibrium() {
        // A = diag(1, 2): value 2/3 at u = v = (2/3, 1/3)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let s = [2.0 / 3.0, 1.0 / 3.0];
        let g = gap_matrix_game(&a, &s, &s).unwrap();
        assert!(g.value.abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let simplex = FeasibleSet::simplex(3).unwrap();
        for _ in 0..200 {
            let a = DMatrix::from_fn(3, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
            let u = simplex.sample(&mut rng);
            let v = simplex.sample(&mut rng);
            let g = gap_matrix_game(&a, &u, &v).unwrap();
            assert!((g.value - vertex_gap(&a, &u, &v)).abs() <= 1e-12);
            assert!(g.value >= -1e-12);
        }
    }

    #[test]
    fn witness_attains_value() {
        let problem = make_matrix_game(vec![vec![0.2, -0.7, 1.0], vec![0.4, 0.1, -0.3]]).unwrap();
        let x = pt(&[0.3, 0.7, 0.2, 0.5, 0.3]);
        let g = problem.exact_gap(&x).unwrap();
        let at_witness = problem.operator().apply(&g.witness).dot(&x.sub(&g.witness));
        assert!(g.value >= at_witness - 1e-12);
        assert!((g.value - at_witness).abs() < 1e-12);
    }

    #[test]
    fn infeasible_strategies_are_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(gap_matrix_game(&a, &[0.6, 0.6], &[0.5, 0.5]).is_err());
        assert!(gap_matrix_game(&a, &[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn zero_operator_has_zero_gap() {
        let set = FeasibleSet::cube(2, -1.0, 1.0).unwrap();
        let op = FnOperator::new(2, |x| Point::zeros(x.dim()));
        let g = gap_bruteforce(&op, &set, &pt(&[0.3, 0.9]), 50).unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn sign_field_grid_gap() {
        let problem = make_holder_1d(0.0).unwrap();
        let g = gap_bruteforce(problem.operator(), problem.set(), &pt(&[0.5]), 10_000).unwrap();
        let h = 2.0 / 9_999.0;
        assert_eq!(g.method, GapMethod::Grid);
        assert!(g.value <= 0.5);
        assert!(g.value >= 0.5 - h);
        assert_eq!(gap_holder_1d(0.0, 0.5).unwrap().value, 0.5);
    }

    #[test]
    fn holder_closed_form_matches_grid() {
        for nu in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let problem = make_holder_1d(nu).unwrap();
            for x in [-0.9, -0.2, 0.0, 0.05, 0.6, 1.0] {
                let exact = gap_holder_1d(nu, x).unwrap().value;
                let grid = gap_bruteforce(problem.operator(), problem.set(), &pt(&[x]), 20_001)
                    .unwrap()
                    .value;
                assert!(grid <= exact + 1e-12, "nu={nu} x={x}");
                assert!(exact - grid <= 2e-4, "nu={nu} x={x} exact={exact} grid={grid}");
            }
        }
        assert_eq!(gap_holder_1d(1.0, 0.5).unwrap().value, 0.0625);
    }

    #[test]
    fn bruteforce_agrees_with_closed_form_on_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..2).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect())
                .collect();
            let problem = make_matrix_game(rows).unwrap();
            let x = problem.set().sample(&mut rng);
            let exact = problem.exact_gap(&x).unwrap().value;
            let brute = gap_bruteforce(problem.operator(), problem.set(), &x, 101).unwrap();
            assert!(brute.value <= exact + 1e-12);
            assert!(exact - brute.value <= 1e-12, "vertices are in the candidate set");
        }
    }

    #[test]
    fn bruteforce_refuses_large_instances() {
        let set = FeasibleSet::cube(5, 0.0, 1.0).unwrap();
        let op = FnOperator::new(5, |x| x.clone());
        assert!(matches!(
            gap_bruteforce(&op, &set, &Point::zeros(5), 10),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn suboptimality_examples() {
        assert_eq!(suboptimality_lower_bound(1.5, 1.5), 0.0);
        let f = |x: f64| 0.5 * x * x;
        assert!((suboptimality_lower_bound(f(0.2), 0.0) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn suboptimality_sandwiched_for_holder_family() {
        for nu in [0.0, 0.5, 1.0] {
            let problem = make_holder_1d(nu).unwrap();
            for x in [-0.7, 0.1, 0.4, 0.95] {
                let f = |t: f64| t.abs().powf(1.0 + nu) / (1.0 + nu);
                let sub = suboptimality_lower_bound(f(x), 0.0);
                let brute = gap_bruteforce(problem.operator(), problem.set(), &pt(&[x]), 10_001)
                    .unwrap()
                    .value;
                let exact = gap_holder_1d(nu, x).unwrap().value;
                let residual = stampacchia_residual(problem.operator(), problem.set(), &pt(&[x]), 10_001).unwrap();
                assert!(brute <= exact + 1e-12, "nu={nu} x={x}");
                assert!(exact <= sub + 1e-12, "nu={nu} x={x}");
                assert!(sub <= residual + 1e-12, "nu={nu} x={x}");
            }
        }
    }

    #[test]
    fn stampacchia_examples() {
        let problem = make_holder_1d(1.0).unwrap();
        let r0 = stampacchia_residual(problem.operator(), problem.set(), &pt(&[0.0]), 1001).unwrap();
        assert_eq!(r0, 0.0);
        let r = stampacchia_residual(problem.operator(), problem.set(), &pt(&[0.1]), 1001).unwrap();
        assert!((r - 0.11).abs() < 1e-12);
    }

    #[test]
    fn nonnegative_gap_for_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let set = FeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let op = FnOperator::new(2, |x| pt(&[x[0] + x[1], x[1] - x[0]]));
        for _ in 0..20 {
            let w = set.sample(&mut rng);
            let g = gap_bruteforce(&op, &set, &w, 41).unwrap();
            assert!(g.value >= -1e-9);
        }
    }
}
