//! Simple convex sets with exact Euclidean projections.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::point::Point;

/// A compact convex feasible set.
///
/// Only shapes with a closed-form (or finite sort-based) projection are
/// supported, so every solver step is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSet")]
pub enum FeasibleSet {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// The probability simplex `{x ≥ 0, Σx = 1}` in ℝⁿ.
    Simplex {
        n: usize,
    },
    Product {
        factors: Vec<FeasibleSet>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Simplex { n: usize },
    Product { factors: Vec<FeasibleSet> },
}

impl TryFrom<RawSet> for FeasibleSet {
    type Error = Error;

    fn try_from(raw: RawSet) -> Result<Self> {
        match raw {
            RawSet::Box { lower, upper } => FeasibleSet::new_box(lower, upper),
            RawSet::Ball { center, radius } => FeasibleSet::ball(center, radius),
            RawSet::Simplex { n } => FeasibleSet::simplex(n),
            RawSet::Product { factors } => FeasibleSet::product(factors),
        }
    }
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(invalid("box bounds must be non-empty and of equal length"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(invalid(format!("box bound {i} is not finite")));
            }
            if l > u {
                return Err(invalid(format!("box lower[{i}] = {l} exceeds upper[{i}] = {u}")));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The cube `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        FeasibleSet::new_box(vec![lo; n], vec![hi; n])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(invalid("ball center must be non-empty"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("ball center is not finite"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("simplex dimension must be positive"));
        }
        Ok(FeasibleSet::Simplex { n })
    }

    pub fn product(factors: Vec<FeasibleSet>) -> Result<Self> {
        if factors.is_empty() {
            return Err(invalid("product needs at least one factor"));
        }
        Ok(FeasibleSet::Product { factors })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Simplex { n } => *n,
            FeasibleSet::Product { factors } => factors.iter().map(FeasibleSet::dim).sum(),
        }
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(invalid(format!(
                "dimension mismatch: set has dimension {}, point has {}",
                self.dim(),
                y.len()
            )));
        }
        Ok(())
    }

    /// Euclidean projection of `y` onto the set.
    pub fn project(&self, y: &Point) -> Result<Point> {
        self.check_dim(y)?;
        let mut out = y.as_slice().to_vec();
        self.project_in_place(&mut out);
        Ok(Point::from_vec(out))
    }

    fn project_in_place(&self, y: &mut [f64]) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                for ((v, l), u) in y.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            FeasibleSet::Ball { center, radius } => {
                let dist = y.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                if dist > *radius {
                    let s = radius / dist;
                    for (v, c) in y.iter_mut().zip(center) {
                        *v = c + s * (*v - c);
                    }
                }
            }
            FeasibleSet::Simplex { .. } => project_simplex(y),
            FeasibleSet::Product { factors } => {
                let mut offset = 0;
                for f in factors {
                    let d = f.dim();
                    f.project_in_place(&mut y[offset..offset + d]);
                    offset += d;
                }
            }
        }
    }

    /// Exact Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum::<f64>()
                .sqrt(),
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Simplex { n } => {
                if *n >= 2 {
                    std::f64::consts::SQRT_2
                } else {
                    0.0
                }
            }
            FeasibleSet::Product { factors } => factors.iter().map(|f| f.diameter().powi(2)).sum::<f64>().sqrt(),
        }
    }

    /// Minimiser of `½‖u‖²` over the set, i.e. the projection of the origin.
    pub fn initial_point(&self) -> Point {
        let mut out = vec![0.0; self.dim()];
        self.project_in_place(&mut out);
        Point::from_vec(out)
    }

    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Ball { center, radius } => {
                let d = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                d <= radius + tol
            }
            FeasibleSet::Simplex { .. } => x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol,
            FeasibleSet::Product { factors } => {
                let mut offset = 0;
                factors.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains(&x[offset..offset + d], tol);
                    offset += d;
                    ok
                })
            }
        }
    }

    /// Draws a random member of the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut out = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut out);
        Point::from_vec(out)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            FeasibleSet::Box { lower, upper } => {
                for (l, u) in lower.iter().zip(upper) {
                    out.push(l + (u - l) * rng.random::<f64>());
                }
            }
            FeasibleSet::Ball { center, radius } => {
                let n = center.len();
                let dir: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                out.extend(center.iter().zip(&dir).map(|(c, d)| c + r * d / norm));
            }
            FeasibleSet::Simplex { n } => {
                // uniform on the simplex: normalised exponentials
                let e: Vec<f64> = (0..*n).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                out.extend(e.iter().map(|v| v / s));
            }
            FeasibleSet::Product { factors } => {
                for f in factors {
                    f.sample_into(rng, out);
                }
            }
        }
    }

    /// Extreme points, when the set is a polytope with few of them.
    pub fn vertices(&self) -> Option<Vec<Point>> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let n = lower.len();
                if n > 16 {
                    return None;
                }
                let out = (0..1usize << n)
                    .map(|mask| {
                        Point::from_vec(
                            (0..n)
                                .map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
                                .collect(),
                        )
                    })
                    .collect();
                Some(out)
            }
            FeasibleSet::Ball { .. } => None,
            FeasibleSet::Simplex { n } => Some(
                (0..*n)
                    .map(|i| {
                        let mut v = vec![0.0; *n];
                        v[i] = 1.0;
                        Point::from_vec(v)
                    })
                    .collect(),
            ),
            FeasibleSet::Product { factors } => {
                let per: Option<Vec<Vec<Point>>> = factors.iter().map(|f| f.vertices()).collect();
                Some(cartesian(&per?))
            }
        }
    }

    /// A finite grid of members: `resolution` points per axis for boxes and
    /// balls, the lattice with `resolution − 1` divisions for simplices, and
    /// the cartesian product for products. Refuses to build more than
    /// `max_points` points.
    pub fn grid(&self, resolution: usize, max_points: usize) -> Result<Vec<Point>> {
        if resolution < 2 {
            return Err(invalid("grid resolution must be at least 2"));
        }
        let count = self.grid_size(resolution);
        if count > max_points as f64 {
            return Err(Error::Unsupported(format!(
                "grid of {count:.0} points exceeds the limit of {max_points}"
            )));
        }
        Ok(self.grid_unchecked(resolution))
    }

    fn grid_size(&self, r: usize) -> f64 {
        match self {
            FeasibleSet::Box { lower, .. } => (r as f64).powi(lower.len() as i32),
            FeasibleSet::Ball { center, .. } => (r as f64).powi(center.len() as i32) + 1.0,
            FeasibleSet::Simplex { n } => binomial(r - 1 + n - 1, n - 1),
            FeasibleSet::Product { factors } => factors.iter().map(|f| f.grid_size(r)).product(),
        }
    }

    fn grid_unchecked(&self, r: usize) -> Vec<Point> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                let axes: Vec<Vec<f64>> = lower.iter().zip(upper).map(|(l, u)| linspace(*l, *u, r)).collect();
                tensor(&axes)
            }
            FeasibleSet::Ball { center, radius } => {
                let axes: Vec<Vec<f64>> = center.iter().map(|c| linspace(c - radius, c + radius, r)).collect();
                let mut pts: Vec<Point> = tensor(&axes).into_iter().filter(|p| self.contains(p, 0.0)).collect();
                pts.push(Point::from_vec(center.clone()));
                pts
            }
            FeasibleSet::Simplex { n } => {
                let divisions = r - 1;
                let mut out = Vec::new();
                let mut counts = vec![0usize; *n];
                compositions(divisions, 0, &mut counts, &mut |c| {
                    out.push(Point::from_vec(
                        c.iter().map(|&k| k as f64 / divisions as f64).collect(),
                    ))
                });
                out
            }
            FeasibleSet::Product { factors } => {
                let per: Vec<Vec<Point>> = factors.iter().map(|f| f.grid_unchecked(r)).collect();
                cartesian(&per)
            }
        }
    }

    /// True when every factor is a probability simplex.
    pub fn is_simplex_product(&self) -> bool {
        match self {
            FeasibleSet::Simplex { .. } => true,
            FeasibleSet::Product { factors } => factors.iter().all(FeasibleSet::is_simplex_product),
            _ => false,
        }
    }
}

/// Sort-based exact projection onto the probability simplex, in place.
fn project_simplex(y: &mut [f64]) {
    let n = y.len();
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    if n > 0 {
        for v in y.iter_mut() {
            *v = (*v - tau).max(0.0);
        }
    }
}

fn linspace(lo: f64, hi: f64, r: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..r)
        .map(|i| {
            if i + 1 == r {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (r - 1) as f64
            }
        })
        .collect()
}

fn tensor(axes: &[Vec<f64>]) -> Vec<Point> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(Point::from_vec).collect()
}

fn cartesian(parts: &[Vec<Point>]) -> Vec<Point> {
    let mut out = vec![Vec::new()];
    for part in parts {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                part.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.extend_from_slice(p);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(Point::from_vec).collect()
}

fn compositions(remaining: usize, idx: usize, counts: &mut [usize], f: &mut impl FnMut(&[usize])) {
    if idx + 1 == counts.len() {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for k in 0..=remaining {
        counts[idx] = k;
        compositions(remaining - k, idx + 1, counts, f);
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
