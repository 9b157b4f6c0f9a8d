//! Test problems with known Hölder constants, diameters and (where
//! available) solutions and exact gap oracles.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gap::{gap_holder_1d, gap_matrix_game, GapResult};
use crate::operator::{HolderConstants, Operator, RandomState, StochasticOracle};
use crate::point::Point;
use crate::set::FeasibleSet;

/// Serializable description of a problem family instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Bilinear game `min_u max_v uᵀAv` on `Δ_m × Δ_n`.
    MatrixGame { a: Vec<Vec<f64>> },
    /// `g(x) = sign(x)|x|^ν` on `[−1, 1]`.
    Holder1d { nu: f64 },
    /// `g(x) = Mx + b` with `M + Mᵀ ⪰ 0`.
    AffineMonotone {
        m: Vec<Vec<f64>>,
        b: Vec<f64>,
        set: FeasibleSet,
    },
    /// `g(x) = x − F(x)` for the nonexpansive affine map `F(x) = Mx + c`.
    FixedPoint {
        m: Vec<Vec<f64>>,
        c: Vec<f64>,
        set: FeasibleSet,
    },
}

/// Constants a problem declares about itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeclaredConstants {
    pub nu: Option<f64>,
    pub l_nu: Option<f64>,
    pub diameter: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
}

/// JSON form of a problem: label, family parameters and declared constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescription {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(flatten)]
    pub spec: ProblemSpec,
    /// Treat the Hölder constants as unknown.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub hide_constants: bool,
    /// Filled in on output; ignored on input.
    #[serde(default, skip_deserializing, skip_serializing_if = "Option::is_none")]
    pub declared: Option<DeclaredConstants>,
}

#[derive(Clone, Debug)]
enum ExactGap {
    None,
    MatrixGame { a: DMatrix<f64> },
    Holder1d { nu: f64 },
}

/// A monotone variational inequality: operator, feasible set and whatever
/// is known about it.
#[derive(Clone)]
pub struct VIProblem {
    label: String,
    spec: Option<ProblemSpec>,
    operator: Arc<dyn Operator>,
    set: FeasibleSet,
    known_nu: Option<f64>,
    known_l: Option<f64>,
    known_solution: Option<Point>,
    exact_gap: ExactGap,
}

impl fmt::Debug for VIProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VIProblem")
            .field("label", &self.label)
            .field("spec", &self.spec)
            .field("set", &self.set)
            .field("known_nu", &self.known_nu)
            .field("known_l", &self.known_l)
            .finish()
    }
}

impl VIProblem {
    /// A problem around an arbitrary operator; nothing is declared.
    pub fn new(label: impl Into<String>, operator: Arc<dyn Operator>, set: FeasibleSet) -> Result<Self> {
        if operator.dim() != set.dim() {
            return Err(invalid("operator and set dimensions differ"));
        }
        let holder = operator.holder();
        Ok(VIProblem {
            label: label.into(),
            spec: None,
            operator,
            set,
            known_nu: holder.map(|h| h.nu),
            known_l: holder.map(|h| h.l_nu),
            known_solution: None,
            exact_gap: ExactGap::None,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operator(&self) -> &dyn Operator {
        self.operator.as_ref()
    }

    pub fn operator_arc(&self) -> Arc<dyn Operator> {
        Arc::clone(&self.operator)
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn spec(&self) -> Option<&ProblemSpec> {
        self.spec.as_ref()
    }

    pub fn known_nu(&self) -> Option<f64> {
        self.known_nu
    }

    pub fn known_l(&self) -> Option<f64> {
        self.known_l
    }

    pub fn holder(&self) -> Option<HolderConstants> {
        Some(HolderConstants {
            nu: self.known_nu?,
            l_nu: self.known_l?,
        })
    }

    pub fn known_solution(&self) -> Option<&Point> {
        self.known_solution.as_ref()
    }

    pub fn diameter(&self) -> f64 {
        self.set.diameter()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_solution(mut self, solution: Point) -> Result<Self> {
        if !self.set.contains(&solution, 1e-9) {
            return Err(invalid("declared solution is not feasible"));
        }
        self.known_solution = Some(solution);
        Ok(self)
    }

    /// Forgets the declared Hölder constants.
    pub fn without_constants(mut self) -> Self {
        self.known_nu = None;
        self.known_l = None;
        self
    }

    pub fn has_exact_gap(&self) -> bool {
        !matches!(self.exact_gap, ExactGap::None)
    }

    /// Exact restricted gap at `w`, for families that have one.
    pub fn exact_gap(&self, w: &Point) -> Result<GapResult> {
        match &self.exact_gap {
            ExactGap::MatrixGame { a } => {
                let m = a.nrows();
                gap_matrix_game(a, &w[..m], &w[m..])
            }
            ExactGap::Holder1d { nu } => gap_holder_1d(*nu, w[0]),
            ExactGap::None => Err(Error::Unsupported(format!(
                "problem '{}' has no exact gap oracle",
                self.label
            ))),
        }
    }

    pub fn describe(&self) -> Result<ProblemDescription> {
        let spec = self
            .spec
            .clone()
            .ok_or_else(|| Error::Unsupported(format!("problem '{}' is not serializable", self.label)))?;
        Ok(ProblemDescription {
            label: Some(self.label.clone()),
            spec,
            hide_constants: self.known_nu.is_none() || self.known_l.is_none(),
            declared: Some(DeclaredConstants {
                nu: self.known_nu,
                l_nu: self.known_l,
                diameter: self.diameter(),
                solution: self.known_solution.as_ref().map(|p| p.to_vec()),
            }),
        })
    }

    pub fn from_description(desc: &ProblemDescription) -> Result<Self> {
        let mut problem = match &desc.spec {
            ProblemSpec::MatrixGame { a } => make_matrix_game(a.clone())?,
            ProblemSpec::Holder1d { nu } => make_holder_1d(*nu)?,
            ProblemSpec::AffineMonotone { m, b, set } => {
                make_affine_monotone(rows_to_matrix(m)?, b.clone(), set.clone())?
            }
            ProblemSpec::FixedPoint { m, c, set } => {
                make_fixed_point_affine(rows_to_matrix(m)?, c.clone(), set.clone())?
            }
        };
        if let Some(label) = &desc.label {
            problem.label = label.clone();
        }
        if desc.hide_constants {
            problem = problem.without_constants();
        }
        Ok(problem)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(invalid("matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("matrix rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("matrix entries must be finite"));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().max()
}

struct MatrixGameOperator {
    a: DMatrix<f64>,
    l1: f64,
}

impl Operator for MatrixGameOperator {
    fn dim(&self) -> usize {
        self.a.nrows() + self.a.ncols()
    }

    fn apply(&self, x: &Point) -> Point {
        let (m, n) = self.a.shape();
        let (u, v) = x.split_at(m);
        let mut out = vec![0.0; m + n];
        for i in 0..m {
            for j in 0..n {
                let aij = self.a[(i, j)];
                out[i] += aij * v[j];
                out[m + j] -= aij * u[i];
            }
        }
        Point::from_vec(out)
    }

    fn holder(&self) -> Option<HolderConstants> {
        Some(HolderConstants { nu: 1.0, l_nu: self.l1 })
    }
}

/// Bilinear game `min_u max_v uᵀAv` on `Δ_m × Δ_n` with the monotone field
/// `g(u, v) = (Av, −Aᵀu)`.
///
/// The field is Lipschitz with constant equal to the largest singular value
/// of `A` (the norm of the skew block operator `[[0, A], [−Aᵀ, 0]]`).
pub fn make_matrix_game(a: Vec<Vec<f64>>) -> Result<VIProblem> {
    let mat = rows_to_matrix(&a)?;
    let (m, n) = mat.shape();
    let l1 = spectral_norm(&mat);
    let set = FeasibleSet::product(vec![FeasibleSet::simplex(m)?, FeasibleSet::simplex(n)?])?;
    Ok(VIProblem {
        label: format!("matrix_game_{m}x{n}"),
        spec: Some(ProblemSpec::MatrixGame { a }),
        operator: Arc::new(MatrixGameOperator { a: mat.clone(), l1 }),
        set,
        known_nu: Some(1.0),
        known_l: Some(l1),
        known_solution: None,
        exact_gap: ExactGap::MatrixGame { a: mat },
    })
}

/// `sign(x)|x|^ν`, with value 0 at the origin for every ν.
pub fn holder_field(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(nu)
    }
}

struct HolderOperator {
    nu: f64,
}

impl Operator for HolderOperator {
    fn dim(&self) -> usize {
        1
    }

    fn apply(&self, x: &Point) -> Point {
        Point::from_vec(vec![holder_field(self.nu, x[0])])
    }

    fn holder(&self) -> Option<HolderConstants> {
        Some(HolderConstants {
            nu: self.nu,
            l_nu: 2f64.powf(1.0 - self.nu),
        })
    }
}

/// `g(x) = sign(x)|x|^ν` on `[−1, 1]`, the subgradient field of
/// `|x|^{1+ν}/(1+ν)`. Hölder with exponent ν and constant `2^{1−ν}`;
/// the unique solution is 0.
pub fn make_holder_1d(nu: f64) -> Result<VIProblem> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(invalid(format!("Hölder exponent must lie in [0, 1], got {nu}")));
    }
    Ok(VIProblem {
        label: format!("holder_1d_nu{nu}"),
        spec: Some(ProblemSpec::Holder1d { nu }),
        operator: Arc::new(HolderOperator { nu }),
        set: FeasibleSet::cube(1, -1.0, 1.0)?,
        known_nu: Some(nu),
        known_l: Some(2f64.powf(1.0 - nu)),
        known_solution: Some(Point::from_vec(vec![0.0])),
        exact_gap: ExactGap::Holder1d { nu },
    })
}

struct AffineOperator {
    m: DMatrix<f64>,
    b: Vec<f64>,
    l1: f64,
}

impl Operator for AffineOperator {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn apply(&self, x: &Point) -> Point {
        let n = self.b.len();
        Point::from_vec(
            (0..n)
                .map(|i| self.b[i] + (0..n).map(|j| self.m[(i, j)] * x[j]).sum::<f64>())
                .collect(),
        )
    }

    fn holder(&self) -> Option<HolderConstants> {
        Some(HolderConstants { nu: 1.0, l_nu: self.l1 })
    }
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(invalid(format!(
            "matrix is {}×{}, expected {n}×{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// `g(x) = Mx + b` over `set`; requires `M + Mᵀ ⪰ 0`.
pub fn make_affine_monotone(m: DMatrix<f64>, b: Vec<f64>, set: FeasibleSet) -> Result<VIProblem> {
    let n = set.dim();
    check_square(&m, n)?;
    if b.len() != n || b.iter().any(|v| !v.is_finite()) {
        return Err(invalid("offset must be finite and match the set dimension"));
    }
    let sym = &m + m.transpose();
    let min_eig = sym.clone().symmetric_eigen().eigenvalues.min();
    let scale = sym.abs().max().max(1.0);
    if min_eig < -1e-10 * scale {
        return Err(invalid(format!(
            "symmetric part has negative eigenvalue {min_eig}; operator is not monotone"
        )));
    }
    let l1 = spectral_norm(&m);
    Ok(VIProblem {
        label: format!("affine_monotone_{n}"),
        spec: Some(ProblemSpec::AffineMonotone {
            m: matrix_to_rows(&m),
            b: b.clone(),
            set: set.clone(),
        }),
        operator: Arc::new(AffineOperator { m, b, l1 }),
        set,
        known_nu: Some(1.0),
        known_l: Some(l1),
        known_solution: None,
        exact_gap: ExactGap::None,
    })
}

/// Fixed-point problem `F(x) = x` posed as the VI with `g(x) = x − F(x)`.
///
/// `F` must be nonexpansive on `set`; this is checked on 10⁴ random member
/// pairs. The resulting `g` is monotone and 2-Lipschitz.
pub fn make_fixed_point(
    label: impl Into<String>,
    f: impl Fn(&Point) -> Point + Send + Sync + 'static,
    set: FeasibleSet,
) -> Result<VIProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..10_000 {
        let x = set.sample(&mut rng);
        let y = set.sample(&mut rng);
        let d = x.dist(&y);
        if d > 0.0 && f(&x).dist(&f(&y)) > d * (1.0 + 1e-9) {
            return Err(invalid("map expands distances; it is not nonexpansive"));
        }
    }
    let n = set.dim();
    let op = crate::operator::FnOperator::new(n, move |x| x.sub(&f(x))).with_holder(1.0, 2.0);
    VIProblem::new(label, Arc::new(op), set)
}

/// Fixed-point problem for the affine map `F(x) = Mx + c` with `‖M‖ ≤ 1`.
/// Lipschitz constant of `g` is `‖I − M‖`; when `I − M` is invertible and
/// the fixed point is feasible it is declared as the solution.
pub fn make_fixed_point_affine(m: DMatrix<f64>, c: Vec<f64>, set: FeasibleSet) -> Result<VIProblem> {
    let n = set.dim();
    check_square(&m, n)?;
    if c.len() != n || c.iter().any(|v| !v.is_finite()) {
        return Err(invalid("offset must be finite and match the set dimension"));
    }
    if spectral_norm(&m) > 1.0 + 1e-12 {
        return Err(invalid("map expands distances; it is not nonexpansive"));
    }
    let i_minus_m = DMatrix::<f64>::identity(n, n) - &m;
    let l1 = spectral_norm(&i_minus_m);
    let solution = i_minus_m
        .clone()
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(&c))
        .map(|x| Point::from_vec(x.iter().copied().collect()))
        .filter(|x| set.contains(x, 1e-9));
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    Ok(VIProblem {
        label: format!("fixed_point_{n}"),
        spec: Some(ProblemSpec::FixedPoint {
            m: matrix_to_rows(&m),
            c,
            set: set.clone(),
        }),
        operator: Arc::new(AffineOperator {
            m: i_minus_m,
            b: neg_c,
            l1,
        }),
        set,
        known_nu: Some(1.0),
        known_l: Some(l1),
        known_solution: solution,
        exact_gap: ExactGap::None,
    })
}

/// Unbiased oracle `g(x) + (σ/√n)ζ` with `ζ` standard normal in ℝⁿ, so the
/// noise has `E‖·‖² = σ²` exactly.
#[derive(Clone)]
pub struct GaussianOracle {
    operator: Arc<dyn Operator>,
    sigma: f64,
    scale: f64,
}

impl StochasticOracle for GaussianOracle {
    fn dim(&self) -> usize {
        self.operator.dim()
    }

    fn sample(&self, x: &Point, rng: &mut RandomState) -> Point {
        let mut g = self.operator.apply(x);
        if self.sigma > 0.0 {
            for v in g.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += self.scale * z;
            }
        }
        g
    }

    fn mean_operator(&self) -> &dyn Operator {
        self.operator.as_ref()
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }
}

pub fn add_gaussian_noise(problem: &VIProblem, sigma: f64) -> Result<GaussianOracle> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level must be non-negative, got {sigma}")));
    }
    let n = problem.set().dim();
    Ok(GaussianOracle {
        operator: problem.operator_arc(),
        sigma,
        scale: sigma / (n as f64).sqrt(),
    })
}
