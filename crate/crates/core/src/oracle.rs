//! Convex functionals given by first-order oracles, and problem instances
//! `min f(x) s.t. g_m(x) <= 0, m = 1..M`.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::{all_finite, dot, norm2, DualVector, Point};

/// Slack for `g_m(x*) <= 0` when a known optimum is attached to an instance.
/// Optima obtained by solving a linear system sit on active constraints up to
/// rounding.
pub const OPTIMUM_FEASIBILITY_TOL: f64 = 1e-9;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("matrix must be at least 1x1".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in &rows {
            check_dim(n, row.len())?;
            data.extend_from_slice(row);
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite("matrix"));
        }
        let scale = data.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = diag[i];
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `out = A x`.
    pub(crate) fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    /// `⟨A x, x⟩`, accumulated row by row in the same order as [`mul_into`](Self::mul_into)
    /// followed by a dot product, so both paths agree bitwise.
    pub(crate) fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n).map(|i| dot(self.row(i), x) * x[i]).sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.data.chunks(m.n).map(|r| r.to_vec()).collect()
    }
}

/// The functional families an oracle can represent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleKind {
    /// `⟨a, x⟩ + b`
    Affine { a: DualVector, b: f64 },
    /// `½⟨A x, x⟩ − ⟨b, x⟩ + α`, with `A` positive semidefinite.
    Quadratic { a: SymMatrix, b: DualVector, alpha: f64 },
    /// `scale · √⟨Q x, x⟩`, with `Q` positive semidefinite.
    SqrtQuadratic { q: SymMatrix, scale: f64 },
    /// `scale · |⟨a, x⟩| + shift`
    AbsAffinePlus { a: DualVector, shift: f64, scale: f64 },
    /// Pointwise maximum of the children.
    MaxOf { children: Vec<FunctionalOracle> },
}

/// A convex functional with value/subgradient access and optional
/// Lipschitz metadata (w.r.t. the Euclidean norm).
///
/// The metadata is never used for step sizes; the solver only reports the
/// a-priori iteration bound from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalOracle {
    #[serde(flatten)]
    kind: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz_gradient: Option<f64>,
}

fn positive_constant(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} must be finite and > 0, got {v}"
        )))
    }
}

impl FunctionalOracle {
    pub fn new(kind: OracleKind) -> Result<Self> {
        let o = Self {
            kind,
            lipschitz_value: None,
            lipschitz_gradient: None,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn affine(a: DualVector, b: f64) -> Result<Self> {
        Self::new(OracleKind::Affine { a, b })
    }

    pub fn quadratic(a: SymMatrix, b: DualVector, alpha: f64) -> Result<Self> {
        Self::new(OracleKind::Quadratic { a, b, alpha })
    }

    pub fn sqrt_quadratic(q: SymMatrix, scale: f64) -> Result<Self> {
        Self::new(OracleKind::SqrtQuadratic { q, scale })
    }

    pub fn abs_affine_plus(a: DualVector, shift: f64, scale: f64) -> Result<Self> {
        Self::new(OracleKind::AbsAffinePlus { a, shift, scale })
    }

    pub fn max_of(children: Vec<FunctionalOracle>) -> Result<Self> {
        Self::new(OracleKind::MaxOf { children })
    }

    pub fn with_lipschitz_value(mut self, m: f64) -> Result<Self> {
        self.lipschitz_value = Some(positive_constant(m, "Lipschitz constant")?);
        Ok(self)
    }

    pub fn with_lipschitz_gradient(mut self, l: f64) -> Result<Self> {
        self.lipschitz_gradient = Some(positive_constant(l, "gradient Lipschitz constant")?);
        Ok(self)
    }

    /// Checks scalar parameters, dimensions and metadata. Called by every
    /// constructor and after deserialization.
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.lipschitz_value {
            positive_constant(m, "Lipschitz constant")?;
        }
        if let Some(l) = self.lipschitz_gradient {
            positive_constant(l, "gradient Lipschitz constant")?;
        }
        match &self.kind {
            OracleKind::Affine { b, .. } if !b.is_finite() => Err(Error::NonFinite("affine offset")),
            OracleKind::Affine { .. } => Ok(()),
            OracleKind::Quadratic { a, b, alpha } => {
                check_dim(a.dim(), b.dim())?;
                if alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite("quadratic constant"))
                }
            }
            OracleKind::SqrtQuadratic { scale, .. } => {
                if scale.is_finite() && *scale >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "sqrt-quadratic scale must be >= 0, got {scale}"
                    )))
                }
            }
            OracleKind::AbsAffinePlus { shift, scale, .. } => {
                if !shift.is_finite() {
                    return Err(Error::NonFinite("abs-affine shift"));
                }
                if scale.is_finite() && *scale >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!(
                        "abs-affine scale must be >= 0, got {scale}"
                    )))
                }
            }
            OracleKind::MaxOf { children } => {
                let first = children
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("max-of needs at least one child".into()))?;
                for c in children {
                    c.validate()?;
                    check_dim(first.dim(), c.dim())?;
                }
                Ok(())
            }
        }
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            OracleKind::Affine { a, .. } | OracleKind::AbsAffinePlus { a, .. } => a.dim(),
            OracleKind::Quadratic { a, .. } => a.dim(),
            OracleKind::SqrtQuadratic { q, .. } => q.dim(),
            OracleKind::MaxOf { children } => children[0].dim(),
        }
    }

    /// Declared `M` with `|f(x) − f(y)| <= M‖x − y‖`. For a max-type oracle
    /// without its own value, the largest child constant when all are known.
    pub fn lipschitz_value(&self) -> Option<f64> {
        self.lipschitz_value.or_else(|| match &self.kind {
            OracleKind::MaxOf { children } => max_known(children.iter().map(|c| c.lipschitz_value())),
            _ => None,
        })
    }

    /// Declared `L` with `‖∇f(x) − ∇f(y)‖ <= L‖x − y‖`; for max-type oracles,
    /// `max_i L_i` over the children when all are known.
    pub fn lipschitz_gradient(&self) -> Option<f64> {
        self.lipschitz_gradient.or_else(|| match &self.kind {
            OracleKind::MaxOf { children } => max_known(children.iter().map(|c| c.lipschitz_gradient())),
            _ => None,
        })
    }

    /// Function value only.
    pub fn value(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        self.value_slice(x.as_slice())
    }

    /// `f(x)` and one subgradient. For max-type oracles the subgradient of the
    /// lowest-index child attaining the maximum is returned.
    pub fn evaluate(&self, x: &Point) -> Result<(f64, DualVector)> {
        check_dim(self.dim(), x.dim())?;
        let mut g = vec![0.0; self.dim()];
        let v = self.evaluate_into(x.as_slice(), &mut g)?;
        Ok((v, DualVector::from_vec_unchecked(g)))
    }

    pub(crate) fn value_slice(&self, x: &[f64]) -> Result<f64> {
        let v = match &self.kind {
            OracleKind::Affine { a, b } => dot(a.as_slice(), x) + b,
            OracleKind::Quadratic { a, b, alpha } => 0.5 * a.quad_form(x) - dot(b.as_slice(), x) + alpha,
            OracleKind::SqrtQuadratic { q, scale } => {
                let form = q.quad_form(x);
                if form <= 0.0 {
                    0.0
                } else {
                    scale * form.sqrt()
                }
            }
            OracleKind::AbsAffinePlus { a, shift, scale } => scale * dot(a.as_slice(), x).abs() + shift,
            OracleKind::MaxOf { children } => return Ok(argmax_child(children, x)?.1),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("non-finite value {v}")))
        }
    }

    /// Writes a subgradient into `grad` and returns the value. Dimensions are
    /// the caller's responsibility. The value is bitwise equal to
    /// [`value_slice`](Self::value_slice).
    pub(crate) fn evaluate_into(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let v = match &self.kind {
            OracleKind::Affine { a, .. } => {
                grad.copy_from_slice(a.as_slice());
                self.value_slice(x)?
            }
            OracleKind::Quadratic { a, b, .. } => {
                a.mul_into(x, grad);
                for (g, bi) in grad.iter_mut().zip(b.iter()) {
                    *g -= bi;
                }
                self.value_slice(x)?
            }
            OracleKind::SqrtQuadratic { q, scale } => {
                let form = q.quad_form(x);
                if form <= 0.0 {
                    // singular point: 0 is a subgradient at the minimizer
                    grad.iter_mut().for_each(|g| *g = 0.0);
                } else {
                    q.mul_into(x, grad);
                    let c = scale / form.sqrt();
                    grad.iter_mut().for_each(|g| *g *= c);
                }
                self.value_slice(x)?
            }
            OracleKind::AbsAffinePlus { a, scale, .. } => {
                let s = dot(a.as_slice(), x);
                let sign = if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                for (g, ai) in grad.iter_mut().zip(a.iter()) {
                    *g = scale * sign * ai;
                }
                self.value_slice(x)?
            }
            OracleKind::MaxOf { children } => {
                let (idx, v) = argmax_child(children, x)?;
                children[idx].evaluate_into(x, grad)?;
                v
            }
        };
        if all_finite(grad) {
            Ok(v)
        } else {
            Err(Error::Evaluation("non-finite subgradient".into()))
        }
    }
}

fn max_known(it: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut best: Option<f64> = None;
    for v in it {
        let v = v?;
        best = Some(best.map_or(v, |b| b.max(v)));
    }
    best
}

/// Lowest index attaining the maximum child value.
fn argmax_child(children: &[FunctionalOracle], x: &[f64]) -> Result<(usize, f64)> {
    let mut best = (0, children[0].value_slice(x)?);
    for (i, c) in children.iter().enumerate().skip(1) {
        let v = c.value_slice(x)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// `min f(x) s.t. g_m(x) <= 0` for `m = 1..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    objective: FunctionalOracle,
    constraints: Vec<FunctionalOracle>,
    dimension: usize,
    known_optimum: Option<(Point, f64)>,
}

impl ProblemInstance {
    pub fn new(objective: FunctionalOracle, constraints: Vec<FunctionalOracle>) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidArgument("at least one constraint is required".into()));
        }
        let dimension = objective.dim();
        for c in &constraints {
            check_dim(dimension, c.dim())?;
        }
        Ok(Self {
            objective,
            constraints,
            dimension,
            known_optimum: None,
        })
    }

    /// Attaches an analytically known optimum `(x*, f*)`. Rejects points that
    /// violate a constraint by more than [`OPTIMUM_FEASIBILITY_TOL`].
    pub fn with_known_optimum(mut self, x: Point, f: f64) -> Result<Self> {
        check_dim(self.dimension, x.dim())?;
        if !f.is_finite() {
            return Err(Error::NonFinite("optimal value"));
        }
        let (g, m) = max_violation(&self.constraints, &x)?;
        if g > OPTIMUM_FEASIBILITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "known optimum violates constraint {m} by {g}"
            )));
        }
        self.known_optimum = Some((x, f));
        Ok(self)
    }

    pub fn objective(&self) -> &FunctionalOracle {
        &self.objective
    }

    pub fn constraints(&self) -> &[FunctionalOracle] {
        &self.constraints
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_optimum(&self) -> Option<&(Point, f64)> {
        self.known_optimum.as_ref()
    }
}

/// `g(x) = max_m g_m(x)` and the lowest attaining index (1-based).
pub fn max_violation(constraints: &[FunctionalOracle], x: &Point) -> Result<(f64, usize)> {
    if constraints.is_empty() {
        return Err(Error::InvalidArgument("no constraints".into()));
    }
    for c in constraints {
        check_dim(c.dim(), x.dim())?;
    }
    let (i, v) = argmax_child(constraints, x.as_slice())?;
    Ok((v, i + 1))
}

/// Euclidean ball `{x : ‖x − center‖ <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

/// Sampled lower estimate of the Lipschitz constant of `oracle` on `region`:
/// the largest Euclidean norm of a returned subgradient over the center and
/// `samples − 1` points drawn uniformly from the ball. Deterministic in `seed`.
pub fn estimate_lipschitz(oracle: &FunctionalOracle, region: &Ball, samples: usize, seed: u64) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    if !(region.radius.is_finite() && region.radius >= 0.0) {
        return Err(Error::InvalidArgument("radius must be finite and >= 0".into()));
    }
    let n = oracle.dim();
    check_dim(n, region.center.dim())?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut x = region.center.as_slice().to_vec();
    let mut g = vec![0.0; n];
    let mut best = {
        oracle.evaluate_into(&x, &mut g)?;
        norm2(&g)
    };
    let mut dir = vec![0.0; n];
    for _ in 1..samples {
        loop {
            dir.iter_mut().for_each(|d| *d = rng.sample(StandardNormal));
            if norm2(&dir) > 0.0 {
                break;
            }
        }
        let r = region.radius * rng.random::<f64>().powf(1.0 / n as f64) / norm2(&dir);
        for ((xi, ci), di) in x.iter_mut().zip(region.center.iter()).zip(&dir) {
            *xi = ci + r * di;
        }
        oracle.evaluate_into(&x, &mut g)?;
        best = best.max(norm2(&g));
    }
    Ok(best)
}
