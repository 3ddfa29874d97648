//! The six ten-dimensional test problems, their verification against the
//! solver's guarantees, and a brute-force grid oracle for small instances.
//!
//! All six share ten affine constraints `g_m(x) = x₁ + Σ_{j≥2} (100(m−1) + 10j)·x_j`
//! and the settings `x⁰ = (1, …, 1)`, `Θ₀ = 3`, `ε = 0.05` with the Euclidean
//! prox anchored at `x⁰`.
//!
//! The point `0` is feasible for every example (all constraints vanish there)
//! and `d(0) = 5 <= Θ₀²`, so it is a valid comparator for the convergence
//! certificates. It is the true optimum for examples 1, 3, 4 and 5 only:
//! example 2 has its optimum on the face `g₁ = 0` (computed here from the
//! KKT system), and example 6 is unbounded below along `−(1, …, 1)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::geometry::ProxStructure;
use crate::oracle::{max_violation, FunctionalOracle, ProblemInstance, SymMatrix};
use crate::solver::{corollary_bound, run, vf_gap, Policy, Regime, RunConfig, SolverReport, StepKind};
use crate::vector::{norm2, DualVector, Point};

pub const EXAMPLE_DIM: usize = 10;
pub const EXAMPLE_THETA0: f64 = 3.0;
pub const EXAMPLE_EPSILON: f64 = 0.05;

/// Additive slack on the `<= ε` guarantee checks.
pub const GUARANTEE_TOL: f64 = 1e-9;

/// The four (regime, policy) pairs compared in the benchmark tables, in
/// table order: aggregate / first-violated under each regime.
pub const TABLE_CONFIGS: [(Regime, Policy); 4] = [
    (Regime::LipschitzObjective, Policy::AggregateMax),
    (Regime::LipschitzObjective, Policy::FirstViolated),
    (Regime::NonstandardGrowth, Policy::AggregateMax),
    (Regime::NonstandardGrowth, Policy::FirstViolated),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSettings {
    pub x0: Point,
    pub theta0: f64,
    pub epsilon: f64,
}

/// Published reference outcome for one benchmark cell. Times are from the
/// original hardware and are only displayed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PublishedCell {
    Completed { iterations: u64, seconds: f64 },
    Exceeded { cap: u64, seconds: f64 },
    NotReported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperExample {
    pub id: u8,
    pub instance: ProblemInstance,
    pub settings: ExampleSettings,
    /// Feasible comparator `(0, f(0))` with `d(0) <= Θ₀²`.
    pub reference: (Point, f64),
    pub applicable_regimes: Vec<Regime>,
}

impl PaperExample {
    pub fn prox(&self) -> Result<ProxStructure> {
        ProxStructure::euclidean(self.settings.x0.clone(), self.settings.theta0)
    }

    pub fn run_config(&self, regime: Regime, policy: Policy) -> Result<RunConfig> {
        RunConfig::new(self.settings.epsilon, regime, policy)
    }

    /// `(x*, f*)` when an optimum exists, else the feasible comparator.
    pub fn comparator(&self) -> &(Point, f64) {
        self.instance.known_optimum().unwrap_or(&self.reference)
    }

    pub fn published(&self, regime: Regime, policy: Policy) -> PublishedCell {
        published_cell(self.id, regime, policy)
    }
}

fn published_cell(id: u8, regime: Regime, policy: Policy) -> PublishedCell {
    use Policy::{AggregateMax as Agg, FirstViolated as First};
    use PublishedCell::*;
    use Regime::{LipschitzObjective as Lip, NonstandardGrowth as Ng};
    let done = |iterations, seconds| Completed { iterations, seconds };
    match (id, regime, policy) {
        (1, Lip, Agg) => done(730_829, 133.0),
        (1, Lip, First) => done(261_800, 40.0),
        (2, Lip, Agg) => done(1_638_946, 262.0),
        (2, Lip, First) => done(453_580, 30.0),
        (2, Ng, Agg) => done(1_584_616, 300.0),
        (2, Ng, First) => done(1_434_006, 156.0),
        (3, Lip, Agg | First) => Exceeded {
            cap: 10_000_000,
            seconds: 500.0,
        },
        (3, Ng, Agg) => done(184_706, 124.0),
        (3, Ng, First) => done(89_940, 110.0),
        (4, Lip, Agg) => done(172_821, 24.0),
        (4, Lip, First) => done(17_255, 1.0),
        (5 | 6, Lip, Agg | First) => Exceeded {
            cap: 1_000_000,
            seconds: 500.0,
        },
        (5, Ng, Agg) => done(182_993, 106.0),
        (5, Ng, First) => done(66_095, 79.0),
        (6, Ng, Agg) => done(180_020, 101.0),
        (6, Ng, First) => done(24_454, 78.0),
        _ => NotReported,
    }
}

/// Coefficients of constraint row `m` (1-based): `1` in column 1 and
/// `100(m−1) + 10j` in column `j >= 2`.
pub fn constraint_row(m: usize) -> Vec<f64> {
    (1..=EXAMPLE_DIM)
        .map(|j| if j == 1 { 1.0 } else { (100 * (m - 1) + 10 * j) as f64 })
        .collect()
}

fn shared_constraints() -> Result<Vec<FunctionalOracle>> {
    (1..=EXAMPLE_DIM)
        .map(|m| {
            let a = constraint_row(m);
            let lip = norm2(&a);
            FunctionalOracle::affine(DualVector::new(a)?, 0.0)?.with_lipschitz_value(lip)
        })
        .collect()
}

fn unit(i: usize) -> Vec<f64> {
    let mut v = vec![0.0; EXAMPLE_DIM];
    v[i] = 1.0;
    v
}

fn sparse(entries: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; EXAMPLE_DIM];
    for &(i, c) in entries {
        v[i - 1] = c;
    }
    v
}

fn objective(id: u8) -> Result<FunctionalOracle> {
    let n = EXAMPLE_DIM;
    match id {
        1 => {
            // √(0.1(Σ xᵢ² + Σ xᵢxᵢ₊₁)) = √0.1 · √⟨Qx, x⟩ with tridiagonal Q;
            // λmax(Q) = 1 + cos(π/11)
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                rows[i][i] = 1.0;
                if i + 1 < n {
                    rows[i][i + 1] = 0.5;
                    rows[i + 1][i] = 0.5;
                }
            }
            let scale = 0.1f64.sqrt();
            let lip = scale * (1.0 + (std::f64::consts::PI / 11.0).cos()).sqrt();
            FunctionalOracle::sqrt_quadratic(SymMatrix::from_rows(rows)?, scale)?.with_lipschitz_value(lip)
        }
        2 => {
            // Σ xᵢ² − x₁x₂ + x₃ − x₈ + x₉x₁₀ = ½⟨Ax, x⟩ − ⟨b, x⟩; λmax(A) = 3
            let mut rows: Vec<Vec<f64>> = (0..n).map(|i| unit(i).iter().map(|v| 2.0 * v).collect()).collect();
            rows[0][1] = -1.0;
            rows[1][0] = -1.0;
            rows[8][9] = 1.0;
            rows[9][8] = 1.0;
            let b = DualVector::new(sparse(&[(3, -1.0), (8, 1.0)]))?;
            FunctionalOracle::quadratic(SymMatrix::from_rows(rows)?, b, 0.0)?.with_lipschitz_gradient(3.0)
        }
        3 => {
            // Σ 5ⁱ xᵢ²
            let diag: Vec<f64> = (1..=n as i32).map(|i| 2.0 * 5f64.powi(i)).collect();
            FunctionalOracle::quadratic(SymMatrix::diagonal(&diag)?, DualVector::zeros(n), 0.0)?
                .with_lipschitz_gradient(2.0 * 5f64.powi(10))
        }
        4 => {
            let pieces = [
                (sparse(&[(1, 1.0), (2, 1.0), (3, 1.0)]), 1.0, 0.1),
                (sparse(&[(4, 1.0), (5, 2.0), (6, 1.0)]), 2.0, 0.01),
                (sparse(&[(7, 1.0), (8, 3.0), (9, 4.0), (10, 10.0)]), 5.0, 0.001),
            ];
            let children = pieces
                .into_iter()
                .map(|(a, shift, scale)| {
                    let lip = scale * norm2(&a);
                    FunctionalOracle::abs_affine_plus(DualVector::new(a)?, shift, scale)?.with_lipschitz_value(lip)
                })
                .collect::<Result<Vec<_>>>()?;
            FunctionalOracle::max_of(children)
        }
        5 => {
            let coeffs = [1.0, 10.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1_000.0, 5_000.0, 10_000.0];
            let children = coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let diag: Vec<f64> = unit(i).iter().map(|v| 2.0 * c * v).collect();
                    FunctionalOracle::quadratic(SymMatrix::diagonal(&diag)?, DualVector::zeros(n), 0.0)?
                        .with_lipschitz_gradient(2.0 * c)
                })
                .collect::<Result<Vec<_>>>()?;
            FunctionalOracle::max_of(children)
        }
        6 => {
            let rows = [
                sparse(&[(1, 1.0), (2, 2.0), (3, 3.0)]),
                sparse(&[(3, 1.0), (4, 4.0), (5, 6.0)]),
                sparse(&[(4, 1.0), (5, 3.0), (6, 6.0), (7, 7.0)]),
                sparse(&[(7, 5.0), (8, 8.0), (9, 9.0)]),
                sparse(&[(1, 1.0), (10, 10.0)]),
            ];
            let children = rows
                .into_iter()
                .map(|a| {
                    let lip = norm2(&a);
                    FunctionalOracle::affine(DualVector::new(a)?, 0.0)?.with_lipschitz_value(lip)
                })
                .collect::<Result<Vec<_>>>()?;
            FunctionalOracle::max_of(children)
        }
        _ => Err(Error::InvalidArgument(format!("example id must be in 1..=6, got {id}"))),
    }
}

/// Minimizer of `½⟨Ax, x⟩ − ⟨b, x⟩` on `{x : ⟨a_k, x⟩ = 0}` for the given
/// active rows, with the multipliers `λ_k` from `Ax − b + Σ λ_k a_k = 0`.
fn equality_qp(a: &SymMatrix, b: &[f64], active: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.dim();
    let k = active.len();
    let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
    let mut rhs = DVector::<f64>::zeros(n + k);
    for i in 0..n {
        for j in 0..n {
            kkt[(i, j)] = a.get(i, j);
        }
        rhs[i] = b[i];
    }
    for (r, row) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = row[j];
            kkt[(j, n + r)] = row[j];
        }
    }
    let sol = kkt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Evaluation("singular KKT system".into()))?;
    Ok((
        sol.rows(0, n).iter().copied().collect(),
        sol.rows(n, k).iter().copied().collect(),
    ))
}

fn known_optimum(id: u8, instance: &ProblemInstance) -> Result<Option<(Point, f64)>> {
    let zero = Point::zeros(EXAMPLE_DIM);
    match id {
        1 | 3 | 4 | 5 => {
            let f = instance.objective().value(&zero)?;
            Ok(Some((zero, f)))
        }
        2 => {
            let crate::oracle::OracleKind::Quadratic { a, b, .. } = instance.objective().kind() else {
                unreachable!("example 2 is quadratic")
            };
            let (x, lambda) = equality_qp(a, b.as_slice(), &[constraint_row(1)])?;
            let x = Point::new(x)?;
            // certify: multiplier nonnegative, inactive rows strictly satisfied
            if lambda[0] < 0.0 {
                return Err(Error::Evaluation("example 2: negative multiplier".into()));
            }
            for c in &instance.constraints()[1..] {
                if c.value(&x)? >= 0.0 {
                    return Err(Error::Evaluation(
                        "example 2: KKT point violates an inactive row".into(),
                    ));
                }
            }
            let f = instance.objective().value(&x)?;
            Ok(Some((x, f)))
        }
        6 => Ok(None),
        _ => unreachable!(),
    }
}

/// Builds example `id` (1..=6) with its shared constraints and settings.
pub fn build_example(id: u8) -> Result<PaperExample> {
    let f = objective(id)?;
    let mut instance = ProblemInstance::new(f, shared_constraints()?)?;
    if let Some((x, v)) = known_optimum(id, &instance)? {
        instance = instance.with_known_optimum(x, v)?;
    }
    let zero = Point::zeros(EXAMPLE_DIM);
    let f0 = instance.objective().value(&zero)?;
    let applicable_regimes = match id {
        1 | 4 => vec![Regime::LipschitzObjective],
        _ => vec![Regime::LipschitzObjective, Regime::NonstandardGrowth],
    };
    Ok(PaperExample {
        id,
        instance,
        settings: ExampleSettings {
            x0: Point::filled(EXAMPLE_DIM, 1.0),
            theta0: EXAMPLE_THETA0,
            epsilon: EXAMPLE_EPSILON,
        },
        reference: (zero, f0),
        applicable_regimes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            passed: lhs <= rhs,
            detail: format!("{lhs:.6e} <= {rhs:.6e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationResult {
    /// False when the run stopped without certifying its output; then no
    /// guarantee checks are made.
    pub criterion_met: bool,
    pub checks: Vec<Check>,
}

impl VerificationResult {
    pub fn passed(&self) -> bool {
        self.criterion_met && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Checks a finished run on example `example` against the guarantees that
/// apply to its regime. See [`verify_run`].
pub fn verify_example(report: &SolverReport, example: &PaperExample) -> Result<VerificationResult> {
    verify_run(report, &example.instance, &example.prox()?, Some(example.comparator()))
}

/// Checks a finished run against the guarantees that apply to its regime:
///
/// * Lipschitz regime: `f(x̄) − f* <= ε`;
/// * both regimes: `g_m(x̄) <= ε` for all `m`;
/// * nonstandard regime with history: `min_{k∈I} v_f(xᵏ, x*) <= ε`, and the
///   corollary bound on `min_k f(xᵏ) − f*` when `L` is declared and the
///   instance has a known optimum;
/// * `N <=` the a-priori bound when the report carries one.
///
/// `comparator` is `(x*, f*)`, or any feasible point with `d(x) <= Θ₀²` and
/// its value (the certificates hold against every such point). Without one
/// only the constraint and bound checks are made.
pub fn verify_run(
    report: &SolverReport,
    instance: &ProblemInstance,
    prox: &ProxStructure,
    comparator: Option<&(Point, f64)>,
) -> Result<VerificationResult> {
    check_dim(instance.dimension(), report.output_point.dim())?;
    if report.constraint_values.len() != instance.constraints().len() {
        return Err(Error::InvalidArgument(format!(
            "report has {} constraint values, instance has {} constraints",
            report.constraint_values.len(),
            instance.constraints().len()
        )));
    }
    if let Some(h) = &report.history {
        let mismatch = h.iter().find(|r| r.kind == StepKind::Productive).is_some_and(|r| {
            let scaled = match report.regime {
                Regime::LipschitzObjective => r.step_size * r.grad_dual_norm * r.grad_dual_norm,
                Regime::NonstandardGrowth => r.step_size * r.grad_dual_norm,
            };
            (scaled / report.epsilon - 1.0).abs() > 1e-9
        });
        if mismatch {
            return Err(Error::InvalidArgument(
                "report history does not match its declared regime".into(),
            ));
        }
    }

    if !report.converged() {
        return Ok(VerificationResult {
            criterion_met: false,
            checks: vec![Check {
                name: "criterion met".into(),
                passed: false,
                detail: format!(
                    "stopped with {:?} after {} steps",
                    report.stop_reason, report.total_steps
                ),
            }],
        });
    }

    let eps = report.epsilon;
    let bound = eps + GUARANTEE_TOL;
    let mut checks = vec![Check {
        name: "criterion met".into(),
        passed: true,
        detail: format!("{:?}", report.stop_reason),
    }];

    let fx = instance.objective().value(&report.output_point)?;
    if let (Regime::LipschitzObjective, Some((_, f_star))) = (report.regime, comparator) {
        checks.push(Check::le("objective gap", fx - f_star, bound));
    }
    for (m, c) in instance.constraints().iter().enumerate() {
        checks.push(Check::le(
            format!("g_{}(x̄)", m + 1),
            c.value(&report.output_point)?,
            bound,
        ));
    }

    if report.regime == Regime::NonstandardGrowth {
        if let (Some(history), Some((x_star, _))) = (&report.history, comparator) {
            let mut best = f64::INFINITY;
            for r in history.iter().filter(|r| r.kind == StepKind::Productive) {
                if let Some(x) = &r.iterate {
                    best = best.min(vf_gap(x, x_star, instance.objective(), prox)?);
                }
            }
            checks.push(Check::le("v_f certificate", best, bound));
        }
        if let (Some((opt, f_opt)), Some(l)) = (instance.known_optimum(), instance.objective().lipschitz_gradient()) {
            let (_, g) = instance.objective().evaluate(opt)?;
            let cb = corollary_bound(prox.dual_norm(&g)?, l, eps)?;
            checks.push(Check::le("corollary bound", fx - f_opt, cb + GUARANTEE_TOL));
        }
    }

    if let Some(b) = report.a_priori_bound {
        checks.push(Check {
            name: "a-priori bound".into(),
            passed: report.total_steps <= b,
            detail: format!("{} <= {}", report.total_steps, b),
        });
    }
    Ok(VerificationResult {
        criterion_met: true,
        checks,
    })
}

/// Axis-aligned grid `lower + k·spacing` (inclusive of `upper` when it lands
/// on the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn cube(dim: usize, half_width: f64, spacing: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
            spacing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub point: Point,
    pub value: f64,
    /// `spacing · √n · M`, with `M` the largest objective subgradient norm seen
    /// on feasible grid points: how far a grid point next to the optimum can
    /// be from `f*`.
    pub resolution_error: f64,
}

/// Largest dimension accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_MAX_DIM: usize = 3;

/// Exhaustive search over the grid points with `max_m g_m <= 0`. The value is
/// an upper bound on `f*` over the box.
pub fn brute_force_optimum(instance: &ProblemInstance, grid: &GridSpec) -> Result<BruteForceResult> {
    let n = instance.dimension();
    if n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "brute force supports dimension <= {BRUTE_FORCE_MAX_DIM}, got {n}"
        )));
    }
    check_dim(n, grid.lower.len())?;
    check_dim(n, grid.upper.len())?;
    if !(grid.spacing.is_finite() && grid.spacing > 0.0) {
        return Err(Error::InvalidArgument("grid spacing must be finite and > 0".into()));
    }
    let counts: Vec<usize> = grid
        .lower
        .iter()
        .zip(&grid.upper)
        .map(|(lo, hi)| {
            if hi < lo {
                Err(Error::InvalidArgument("grid upper bound below lower bound".into()))
            } else {
                Ok(((hi - lo) / grid.spacing + 1e-9).floor() as usize + 1)
            }
        })
        .collect::<Result<_>>()?;

    let mut idx = vec![0usize; n];
    let mut best: Option<(Point, f64)> = None;
    let mut max_grad = 0.0_f64;
    loop {
        let coords: Vec<f64> = idx
            .iter()
            .zip(&grid.lower)
            .map(|(&k, lo)| lo + k as f64 * grid.spacing)
            .collect();
        let x = Point::new(coords)?;
        let (g, _) = max_violation(instance.constraints(), &x)?;
        if g <= 0.0 {
            let (f, s) = instance.objective().evaluate(&x)?;
            max_grad = max_grad.max(norm2(s.as_slice()));
            if best.as_ref().is_none_or(|(_, b)| f < *b) {
                best = Some((x.clone(), f));
            }
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == n {
                let (point, value) = best.ok_or_else(|| Error::InvalidArgument("no feasible grid point".into()))?;
                return Ok(BruteForceResult {
                    point,
                    value,
                    resolution_error: grid.spacing * (n as f64).sqrt() * max_grad,
                });
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// One cell of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchCell {
    pub example: u8,
    pub regime: Regime,
    pub policy: Policy,
    pub published: PublishedCell,
    pub outcome: std::result::Result<(SolverReport, VerificationResult), Error>,
}

impl BenchCell {
    /// `f(x̄) − f*` against the example's optimum or comparator.
    pub fn objective_gap(&self, example: &PaperExample) -> Option<f64> {
        self.outcome
            .as_ref()
            .ok()
            .map(|(r, _)| r.output_objective - example.comparator().1)
    }
}

/// Runs every example in `ids` under the four table configurations, cells in
/// parallel. Failures are kept per cell.
pub fn run_bench(ids: &[u8], max_iterations: u64, record_history: bool) -> Result<Vec<(PaperExample, Vec<BenchCell>)>> {
    let examples = ids.iter().map(|&id| build_example(id)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Regime, Policy)> = (0..examples.len())
        .flat_map(|e| TABLE_CONFIGS.iter().map(move |&(r, p)| (e, r, p)))
        .collect();
    let cells: Vec<BenchCell> = jobs
        .into_par_iter()
        .map(|(e, regime, policy)| {
            let ex = &examples[e];
            let outcome = (|| {
                let cfg = ex
                    .run_config(regime, policy)?
                    .with_max_iterations(max_iterations)?
                    .with_history(record_history);
                let report = run(&ex.instance, &ex.prox()?, &cfg)?;
                let verification = verify_example(&report, ex)?;
                Ok((report, verification))
            })();
            BenchCell {
                example: ex.id,
                regime,
                policy,
                published: ex.published(regime, policy),
                outcome,
            }
        })
        .collect();
    let mut grouped: Vec<(PaperExample, Vec<BenchCell>)> = examples.into_iter().map(|e| (e, Vec::new())).collect();
    for cell in cells {
        let slot = grouped
            .iter_mut()
            .find(|(e, _)| e.id == cell.example)
            .expect("cell example");
        slot.1.push(cell);
    }
    Ok(grouped)
}
