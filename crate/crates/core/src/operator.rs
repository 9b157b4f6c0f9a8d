//! Deterministic operators and stochastic oracles.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::set::FeasibleSet;

/// Random state owned by one run (or one thread).
pub type RandomState = ChaCha8Rng;

/// Declared Hölder exponent `nu ∈ [0, 1]` and constant `l_nu ≥ 0`:
/// `‖g(x) − g(y)‖ ≤ l_nu ‖x − y‖^nu` on the feasible set.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HolderConstants {
    pub nu: f64,
    pub l_nu: f64,
}

/// A vector field `g: ℝⁿ → ℝⁿ`, assumed monotone on the feasible set.
pub trait Operator: Send + Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &Point) -> Point;

    fn holder(&self) -> Option<HolderConstants> {
        None
    }
}

/// An [`Operator`] backed by a closure.
#[derive(Clone)]
pub struct FnOperator {
    dim: usize,
    f: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    holder: Option<HolderConstants>,
}

impl FnOperator {
    pub fn new(dim: usize, f: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        FnOperator {
            dim,
            f: Arc::new(f),
            holder: None,
        }
    }

    pub fn with_holder(mut self, nu: f64, l_nu: f64) -> Self {
        self.holder = Some(HolderConstants { nu, l_nu });
        self
    }
}

impl fmt::Debug for FnOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnOperator")
            .field("dim", &self.dim)
            .field("holder", &self.holder)
            .finish()
    }
}

impl Operator for FnOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &Point) -> Point {
        (self.f)(x)
    }

    fn holder(&self) -> Option<HolderConstants> {
        self.holder
    }
}

/// Counts evaluations of the wrapped operator.
pub struct CountingOperator<'a> {
    inner: &'a dyn Operator,
    calls: AtomicU64,
}

impl<'a> CountingOperator<'a> {
    pub fn new(inner: &'a dyn Operator) -> Self {
        CountingOperator {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Operator for CountingOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &Point) -> Point {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x)
    }

    fn holder(&self) -> Option<HolderConstants> {
        self.inner.holder()
    }
}

/// A stochastic first-order oracle `g(x, ξ)` with `E[g(x, ξ)] = g(x)` and
/// `E‖g(x, ξ) − g(x)‖² ≤ σ²`.
pub trait StochasticOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn sample(&self, x: &Point, rng: &mut RandomState) -> Point;

    fn mean_operator(&self) -> &dyn Operator;

    fn sigma(&self) -> f64;
}

/// Evaluates `op` at `x`, rejecting non-finite output.
pub fn evaluate(op: &dyn Operator, x: &Point, iteration: u64) -> Result<Point> {
    let g = op.apply(x);
    check_finite(g, x, iteration)
}

pub(crate) fn check_finite(g: Point, x: &Point, iteration: u64) -> Result<Point> {
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::Evaluation {
            iteration,
            point: x.clone(),
        })
    }
}

/// Smallest `⟨g(x) − g(y), x − y⟩` seen over `pairs` random member pairs.
pub fn min_monotonicity_inner<R: Rng + ?Sized>(op: &dyn Operator, set: &FeasibleSet, pairs: usize, rng: &mut R) -> f64 {
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let x = set.sample(rng);
        let y = set.sample(rng);
        let gx = op.apply(&x);
        let gy = op.apply(&y);
        worst = worst.min(gx.sub(&gy).dot(&x.sub(&y)));
    }
    worst
}

/// Largest `‖g(x) − g(y)‖ / ‖x − y‖^nu` seen over `pairs` random member pairs.
pub fn max_holder_ratio<R: Rng + ?Sized>(
    op: &dyn Operator,
    set: &FeasibleSet,
    nu: f64,
    pairs: usize,
    rng: &mut R,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = set.sample(rng);
        let y = set.sample(rng);
        let d = x.dist(&y);
        if d == 0.0 {
            continue;
        }
        let num = op.apply(&x).dist(&op.apply(&y));
        worst = worst.max(num / d.powf(nu));
    }
    worst
}
