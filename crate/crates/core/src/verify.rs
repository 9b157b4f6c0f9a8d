//! Brute-force reference oracles for small instances.
//!
//! Nothing here calls the projection, prox or closed-form gap code; these
//! routines exist to cross-check it.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::set::FeasibleSet;

/// Minimises `f(x0 + B p)` over `p ∈ ℝᵐ` by repeated grid refinement around
/// the best point. Reliable for strongly convex `f` with a well-conditioned
/// Hessian in `p`; comparing function values limits the accuracy of the
/// minimiser to about `√ε` relative.
fn zoom_argmin(f: &dyn Fn(&[f64]) -> f64, m: usize, center: &[f64], half_width: f64, tol: f64) -> Vec<f64> {
    const N: usize = 11;
    let mut c = center.to_vec();
    let mut w = half_width;
    let mut p = vec![0.0; m];
    while w > tol {
        let h = 2.0 * w / (N - 1) as f64;
        let mut best = (f64::INFINITY, c.clone());
        for idx in 0..N.pow(m as u32) {
            let mut rem = idx;
            for j in 0..m {
                p[j] = c[j] - w + h * (rem % N) as f64;
                rem /= N;
            }
            let v = f(&p);
            if v < best.0 {
                best = (v, p.clone());
            }
        }
        c = best.1;
        w = 2.0 * h;
    }
    c
}

fn affine(x0: &[f64], basis: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let mut x = x0.to_vec();
    for (b, pj) in basis.iter().zip(p) {
        for (xi, bi) in x.iter_mut().zip(b) {
            *xi += pj * bi;
        }
    }
    x
}

/// Minimiser of `f` over the affine set `x0 + span(basis)`.
fn affine_min(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], basis: &[Vec<f64>], half_width: f64) -> Vec<f64> {
    let m = basis.len();
    if m == 0 {
        return x0.to_vec();
    }
    let g = |p: &[f64]| f(&affine(x0, basis, p));
    let p = zoom_argmin(&g, m, &vec![0.0; m], half_width, 1e-10);
    affine(x0, basis, &p)
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Minimiser of the strongly convex quadratic `f` (Hessian a multiple of the
/// identity) over a box, simplex or ball of dimension at most 3.
///
/// Polytopes are handled by enumerating faces: the minimiser is the
/// minimiser over the affine hull of the face containing it in its relative
/// interior, and that hull minimiser is feasible. The ball is handled by its
/// interior and an angular grid on the sphere.
pub fn minimize_quadratic(f: &dyn Fn(&[f64]) -> f64, set: &FeasibleSet, scale: f64) -> Result<Point> {
    let n = set.dim();
    if n > 3 {
        return Err(Error::Unsupported(format!(
            "brute-force minimisation needs dimension ≤ 3, got {n}"
        )));
    }
    let hw = 4.0 * scale.max(1.0);
    let tol = 1e-9;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if set.contains(&x, tol) {
            let v = f(&x);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, x));
            }
        }
    };
    match set {
        FeasibleSet::Box { lower, upper } => {
            for face in 0..3usize.pow(n as u32) {
                let mut x0 = vec![0.0; n];
                let mut basis = Vec::new();
                let mut rem = face;
                for i in 0..n {
                    match rem % 3 {
                        0 => x0[i] = lower[i],
                        1 => x0[i] = upper[i],
                        _ => basis.push(unit(n, i)),
                    }
                    rem /= 3;
                }
                consider(affine_min(f, &x0, &basis, hw));
            }
        }
        FeasibleSet::Simplex { .. } => {
            for support in 1..(1usize << n) {
                let idx: Vec<usize> = (0..n).filter(|i| support >> i & 1 == 1).collect();
                let last = *idx.last().expect("non-empty support");
                let x0 = unit(n, last);
                let basis: Vec<Vec<f64>> = idx[..idx.len() - 1]
                    .iter()
                    .map(|&i| {
                        let mut b = unit(n, i);
                        b[last] = -1.0;
                        b
                    })
                    .collect();
                consider(affine_min(f, &x0, &basis, hw));
            }
        }
        FeasibleSet::Ball { center, radius } => {
            let basis: Vec<Vec<f64>> = (0..n).map(|i| unit(n, i)).collect();
            consider(affine_min(f, center, &basis, hw));
            let on_sphere = |angles: &[f64]| -> Vec<f64> {
                let dir = match n {
                    1 => vec![if angles[0] < 0.0 { -1.0 } else { 1.0 }],
                    2 => vec![angles[0].cos(), angles[0].sin()],
                    _ => vec![
                        angles[0].sin() * angles[1].cos(),
                        angles[0].sin() * angles[1].sin(),
                        angles[0].cos(),
                    ],
                };
                center.iter().zip(dir).map(|(c, d)| c + radius * d).collect()
            };
            let m = if n == 1 { 1 } else { n - 1 };
            let g = |a: &[f64]| f(&on_sphere(a));
            // coarse global scan, then local refinement
            let coarse = 64usize;
            let mut start = (f64::INFINITY, vec![0.0; m]);
            for idx in 0..coarse.pow(m as u32) {
                let mut rem = idx;
                let a: Vec<f64> = (0..m)
                    .map(|_| {
                        let t = (rem % coarse) as f64 / coarse as f64;
                        rem /= coarse;
                        -std::f64::consts::PI + 2.0 * std::f64::consts::PI * t
                    })
                    .collect();
                let v = g(&a);
                if v < start.0 {
                    start = (v, a);
                }
            }
            let a = zoom_argmin(&g, m, &start.1, 2.0 * std::f64::consts::PI / coarse as f64, 1e-10);
            consider(on_sphere(&a));
        }
        FeasibleSet::Product { .. } => {
            return Err(Error::Unsupported("brute-force minimisation over products".into()));
        }
    }
    best.map(|(_, x)| Point::from_vec(x))
        .ok_or_else(|| invalid("no feasible candidate found"))
}

/// Projection by brute-force minimisation of `½‖x − y‖²`.
pub fn project_bruteforce(y: &Point, set: &FeasibleSet) -> Result<Point> {
    let f = |x: &[f64]| {
        x.iter()
            .zip(y.iter())
            .map(|(a, b)| 0.5 * (a - b) * (a - b))
            .sum::<f64>()
    };
    minimize_quadratic(&f, set, y.norm() + set.diameter())
}

/// Prox step by brute-force minimisation of `⟨g, x⟩ + (L/2)‖x − z‖²`.
pub fn prox_bruteforce(z: &Point, g: &Point, l: f64, set: &FeasibleSet) -> Result<Point> {
    if l.is_nan() || l <= 0.0 {
        return Err(invalid("L must be positive"));
    }
    let f = |x: &[f64]| {
        x.iter()
            .zip(z.iter())
            .zip(g.iter())
            .map(|((xi, zi), gi)| gi * xi + 0.5 * l * (xi - zi) * (xi - zi))
            .sum::<f64>()
    };
    minimize_quadratic(&f, set, z.norm() + g.norm() / l + set.diameter())
}

/// Restricted gap of a matrix game by enumerating all vertex pairs
/// `(e_i, e_j)` of `Δ_m × Δ_n`.
pub fn game_gap_vertices(a: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let (m, n) = a.shape();
    let mut best = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..n {
            // y = (e_i, e_j): g(y) = (A e_j, −Aᵀ e_i)
            let mut val = 0.0;
            for r in 0..m {
                let ur = if r == i { 1.0 } else { 0.0 };
                val += a[(r, j)] * (u[r] - ur);
            }
            for c in 0..n {
                let vc = if c == j { 1.0 } else { 0.0 };
                val -= a[(i, c)] * (v[c] - vc);
            }
            best = best.max(val);
        }
    }
    best
}

/// Solves `(L − L_k)D²/2 = max{0, inner − L·dz_sq/2}` for `L ≥ L_k` by
/// bisection.
pub fn l_update_bisection(l_k: f64, inner: f64, dz_sq: f64, d: f64) -> f64 {
    let h = |l: f64| (l - l_k) * d * d / 2.0 - (inner - l * dz_sq / 2.0).max(0.0);
    let (mut lo, mut hi) = (l_k, l_k.max(1.0));
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
