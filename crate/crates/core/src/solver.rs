//! Adaptive mirror descent with functional constraints.
//!
//! One loop covers four methods: a step-size/stopping [`Regime`] crossed with
//! a constraint-selection [`Policy`]. At each iterate `xᵏ`:
//!
//! * if every `g_m(xᵏ) <= ε` the step is *productive*: it descends on the
//!   objective and `k` joins the set `I`;
//! * otherwise the step is *non-productive*: the policy picks a constraint
//!   with `g_m(xᵏ) > ε` and the step descends on it.
//!
//! | regime               | productive `h`  | non-productive `h` | stop when                                    | output                      |
//! |----------------------|-----------------|--------------------|----------------------------------------------|-----------------------------|
//! | `LipschitzObjective` | `ε / ‖∇f‖²`     | `ε / ‖∇g_m‖²`      | `Σ_k 1/M_k² >= 2Θ₀²/ε²`                      | `h`-weighted mean over `I`  |
//! | `NonstandardGrowth`  | `ε / ‖∇f‖`      | `ε / ‖∇g_m‖²`      | `Θ₀² <= ε²/2 (|I| + Σ_{k∉I} 1/‖∇g_m‖²)`      | best objective over `I`     |
//!
//! The `AggregateMax` policy descends on the subgradient of `max_m g_m`,
//! giving the classical methods; `FirstViolated` takes the first constraint
//! above `ε`.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{pair_diff, ProxStructure};
use crate::oracle::{FunctionalOracle, ProblemInstance};
use crate::vector::{DualVector, Point};

pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Lipschitz objective: `h = ε/‖∇f‖²` on productive steps.
    LipschitzObjective,
    /// Objective with Lipschitz gradient (or max of such): `h = ε/‖∇f‖`.
    NonstandardGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Subgradient of `g = max_m g_m` (lowest index on ties).
    AggregateMax,
    /// Lowest-index constraint with `g_m(x) > ε`.
    FirstViolated,
    /// Constraint attaining the maximum violation. Selects the same index as
    /// `AggregateMax`.
    MaxViolation,
    /// Among violated constraints, the one with the smallest subgradient dual
    /// norm (ties to the lowest index).
    MinDualNormViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub regime: Regime,
    pub policy: Policy,
    pub max_iterations: u64,
    pub record_history: bool,
}

impl RunConfig {
    pub fn new(epsilon: f64, regime: Regime, policy: Policy) -> Result<Self> {
        let c = Self {
            epsilon,
            regime,
            policy,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            record_history: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_max_iterations(mut self, cap: u64) -> Result<Self> {
        self.max_iterations = cap;
        self.validate()?;
        Ok(self)
    }

    pub fn with_history(mut self, on: bool) -> Self {
        self.record_history = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    Productive,
    NonProductive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: u64,
    pub kind: StepKind,
    pub step_size: f64,
    /// `M_k`: dual norm of the subgradient used for the step.
    pub grad_dual_norm: f64,
    /// 1-based constraint index `m(k)`; non-productive steps only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_index: Option<usize>,
    /// `f(xᵏ)`; productive steps only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_value: Option<f64>,
    /// `xᵏ`; productive steps only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CriterionMet,
    /// A productive iterate had a zero objective subgradient, so it minimizes
    /// `f` outright.
    ZeroObjectiveGradient,
    /// A violated constraint had a zero subgradient: `g_m > ε` everywhere and
    /// the problem has no solution.
    InfeasibleConstraint,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub regime: Regime,
    pub policy: Policy,
    pub epsilon: f64,
    pub total_steps: u64,
    pub productive_count: u64,
    pub nonproductive_count: u64,
    pub output_point: Point,
    pub output_objective: f64,
    pub output_max_violation: f64,
    /// `g_m(x̄)` for every constraint, in order.
    pub constraint_values: Vec<f64>,
    pub stop_reason: StopReason,
    pub a_priori_bound: Option<u64>,
    pub history: Option<Vec<StepRecord>>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

impl SolverReport {
    /// Whether the stopping rule certifies the output (criterion met, or an
    /// exact minimizer of the objective was hit on a productive step).
    pub fn converged(&self) -> bool {
        matches!(
            self.stop_reason,
            StopReason::CriterionMet | StopReason::ZeroObjectiveGradient
        )
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// A constraint chosen for a non-productive step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// 1-based constraint index.
    pub index: usize,
    pub value: f64,
    pub subgradient: DualVector,
}

/// Reusable buffers for constraint selection inside the loop.
struct Selector {
    values: Vec<f64>,
    candidate: Vec<f64>,
}

impl Selector {
    fn new(dim: usize, count: usize) -> Self {
        Self {
            values: vec![0.0; count],
            candidate: vec![0.0; dim],
        }
    }

    /// Returns `None` when `max_m g_m(x) <= ε`; otherwise the 0-based index and
    /// value of the chosen constraint, with its subgradient in `grad`.
    fn select(
        &mut self,
        constraints: &[FunctionalOracle],
        prox: &ProxStructure,
        x: &[f64],
        epsilon: f64,
        policy: Policy,
        grad: &mut [f64],
    ) -> Result<Option<(usize, f64)>> {
        match policy {
            Policy::FirstViolated => {
                for (m, c) in constraints.iter().enumerate() {
                    let v = c.value_slice(x)?;
                    if v > epsilon {
                        c.evaluate_into(x, grad)?;
                        return Ok(Some((m, v)));
                    }
                }
                Ok(None)
            }
            Policy::AggregateMax | Policy::MaxViolation => {
                let mut best = (0, f64::NEG_INFINITY);
                for (m, c) in constraints.iter().enumerate() {
                    let v = c.value_slice(x)?;
                    if v > best.1 {
                        best = (m, v);
                    }
                }
                if best.1 <= epsilon {
                    return Ok(None);
                }
                constraints[best.0].evaluate_into(x, grad)?;
                Ok(Some(best))
            }
            Policy::MinDualNormViolated => {
                for (v, c) in self.values.iter_mut().zip(constraints) {
                    *v = c.value_slice(x)?;
                }
                let mut best: Option<(usize, f64, f64)> = None;
                for (m, c) in constraints.iter().enumerate() {
                    let v = self.values[m];
                    if v <= epsilon {
                        continue;
                    }
                    c.evaluate_into(x, &mut self.candidate)?;
                    let norm = prox.dual_norm_slice(&self.candidate);
                    if best.is_none_or(|(_, _, b)| norm < b) {
                        best = Some((m, v, norm));
                        grad.copy_from_slice(&self.candidate);
                    }
                }
                Ok(best.map(|(m, v, _)| (m, v)))
            }
        }
    }
}

/// Picks the constraint for a non-productive step at `x`, or `None` when
/// `max_m g_m(x) <= ε` and the step is productive.
pub fn select_constraint(
    problem: &ProblemInstance,
    prox: &ProxStructure,
    x: &Point,
    epsilon: f64,
    policy: Policy,
) -> Result<Option<Selection>> {
    check_dim(problem.dimension(), x.dim())?;
    let mut sel = Selector::new(problem.dimension(), problem.constraints().len());
    let mut grad = vec![0.0; problem.dimension()];
    Ok(sel
        .select(problem.constraints(), prox, x.as_slice(), epsilon, policy, &mut grad)?
        .map(|(m, value)| Selection {
            index: m + 1,
            value,
            subgradient: DualVector::from_vec_unchecked(grad),
        }))
}

/// Runs the method from `prox.anchor()` until the regime's stopping rule holds,
/// a degenerate case is hit, or the iteration cap is reached.
pub fn run(problem: &ProblemInstance, prox: &ProxStructure, config: &RunConfig) -> Result<SolverReport> {
    config.validate()?;
    let n = problem.dimension();
    check_dim(n, prox.dim())?;
    if !prox.contains(prox.anchor()) {
        return Err(Error::Domain(
            "start point is not feasible for the prox geometry".into(),
        ));
    }
    let start = Instant::now();
    let eps = config.epsilon;
    let theta0_sq = prox.theta0() * prox.theta0();
    let objective = problem.objective();
    let constraints = problem.constraints();

    let mut x = prox.anchor().as_slice().to_vec();
    let mut next = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut selector = Selector::new(n, constraints.len());

    // Running state. Lipschitz regime: Σ 1/M_k² over all steps plus the
    // weighted-average numerator/denominator. Nonstandard regime: Σ 1/M_k²
    // over non-productive steps plus the best productive iterate.
    let mut inv_sq_sum = 0.0;
    let mut weighted_sum = vec![0.0; n];
    let mut weight_total = 0.0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut productive = 0u64;
    let mut steps = 0u64;
    let mut history = config.record_history.then(Vec::new);
    let lipschitz_threshold = 2.0 * theta0_sq / (eps * eps);

    let stop = loop {
        if steps >= config.max_iterations {
            break StopReason::IterationCap;
        }
        let selection = selector.select(constraints, prox, &x, eps, config.policy, &mut grad)?;
        let (kind, h, norm, record_extra) = match selection {
            None => {
                let fx = objective.evaluate_into(&x, &mut grad)?;
                let norm = prox.dual_norm_slice(&grad);
                if norm == 0.0 {
                    let point = Point::from_vec_unchecked(x.clone());
                    let stop = StopReason::ZeroObjectiveGradient;
                    return finish(
                        problem,
                        prox,
                        config,
                        (point, fx),
                        stop,
                        steps,
                        productive,
                        history,
                        start,
                    );
                }
                let h = match config.regime {
                    Regime::LipschitzObjective => {
                        let h = eps / (norm * norm);
                        inv_sq_sum += 1.0 / (norm * norm);
                        for (s, xi) in weighted_sum.iter_mut().zip(&x) {
                            *s += h * xi;
                        }
                        weight_total += h;
                        h
                    }
                    Regime::NonstandardGrowth => {
                        if best.as_ref().is_none_or(|(b, _)| fx < *b) {
                            match &mut best {
                                Some((b, bx)) => {
                                    *b = fx;
                                    bx.copy_from_slice(&x);
                                }
                                None => best = Some((fx, x.clone())),
                            }
                        }
                        eps / norm
                    }
                };
                productive += 1;
                (StepKind::Productive, h, norm, (None, Some(fx)))
            }
            Some((m, _)) => {
                let norm = prox.dual_norm_slice(&grad);
                if norm == 0.0 {
                    let point = Point::from_vec_unchecked(x.clone());
                    let fx = objective.value_slice(&x)?;
                    let stop = StopReason::InfeasibleConstraint;
                    return finish(
                        problem,
                        prox,
                        config,
                        (point, fx),
                        stop,
                        steps,
                        productive,
                        history,
                        start,
                    );
                }
                inv_sq_sum += 1.0 / (norm * norm);
                (StepKind::NonProductive, eps / (norm * norm), norm, (Some(m + 1), None))
            }
        };

        if let Some(hist) = history.as_mut() {
            hist.push(StepRecord {
                index: steps,
                kind,
                step_size: h,
                grad_dual_norm: norm,
                constraint_index: record_extra.0,
                objective_value: record_extra.1,
                iterate: (kind == StepKind::Productive).then(|| Point::from_vec_unchecked(x.clone())),
            });
        }

        prox.mirror_step_into(&x, &grad, h, &mut next)?;
        std::mem::swap(&mut x, &mut next);
        steps += 1;

        let done = match config.regime {
            Regime::LipschitzObjective => inv_sq_sum >= lipschitz_threshold,
            Regime::NonstandardGrowth => theta0_sq <= 0.5 * eps * eps * (productive as f64 + inv_sq_sum),
        };
        if done {
            break StopReason::CriterionMet;
        }
    };

    let output = if productive == 0 {
        None
    } else {
        match config.regime {
            Regime::LipschitzObjective => {
                let avg: Vec<f64> = weighted_sum.iter().map(|s| s / weight_total).collect();
                Some(Point::new(avg)?)
            }
            Regime::NonstandardGrowth => best.map(|(_, bx)| Point::from_vec_unchecked(bx)),
        }
    };
    let output = match output {
        Some(p) => p,
        // no productive step yet: report the current iterate
        None => Point::from_vec_unchecked(x),
    };
    let fx = objective.value(&output)?;
    finish(
        problem,
        prox,
        config,
        (output, fx),
        stop,
        steps,
        productive,
        history,
        start,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &ProblemInstance,
    prox: &ProxStructure,
    config: &RunConfig,
    output: (Point, f64),
    stop_reason: StopReason,
    steps: u64,
    productive: u64,
    history: Option<Vec<StepRecord>>,
    start: Instant,
) -> Result<SolverReport> {
    let (output_point, output_objective) = output;
    let constraint_values = problem
        .constraints()
        .iter()
        .map(|c| c.value(&output_point))
        .collect::<Result<Vec<_>>>()?;
    let output_max_violation = constraint_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SolverReport {
        regime: config.regime,
        policy: config.policy,
        epsilon: config.epsilon,
        total_steps: steps,
        productive_count: productive,
        nonproductive_count: steps - productive,
        output_point,
        output_objective,
        output_max_violation,
        constraint_values,
        stop_reason,
        a_priori_bound: a_priori_bound(problem, prox.theta0(), config),
        history,
        wall_time: start.elapsed(),
    })
}

fn a_priori_bound(problem: &ProblemInstance, theta0: f64, config: &RunConfig) -> Option<u64> {
    let m_g = problem
        .constraints()
        .iter()
        .map(|c| c.lipschitz_value())
        .try_fold(0.0_f64, |acc, m| m.map(|m| acc.max(m)))?;
    if m_g <= 0.0 {
        return None;
    }
    let m_f = match config.regime {
        Regime::LipschitzObjective => Some(problem.objective().lipschitz_value()?),
        Regime::NonstandardGrowth => None,
    };
    iteration_bound(m_f, m_g, theta0, config.epsilon, config.regime).ok()
}

/// Direction-normalized gap
/// `v_f(x, y) = ⟨∇f(x)/‖∇f(x)‖_*, x − y⟩`, or `0` when `∇f(x) = 0`.
pub fn vf_gap(x: &Point, y: &Point, objective: &FunctionalOracle, prox: &ProxStructure) -> Result<f64> {
    check_dim(objective.dim(), x.dim())?;
    check_dim(objective.dim(), y.dim())?;
    check_dim(prox.dim(), x.dim())?;
    let (_, g) = objective.evaluate(x)?;
    let norm = prox.dual_norm(&g)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(pair_diff(g.as_slice(), x.as_slice(), y.as_slice()) / norm)
}

/// Worst-case number of steps before the stopping rule must hold:
/// `⌈2·max{M_f², M_g²}·Θ₀²/ε²⌉` for the Lipschitz regime and
/// `⌈2·max{1, M_g²}·Θ₀²/ε²⌉` for the nonstandard-growth regime.
pub fn iteration_bound(m_f: Option<f64>, m_g: f64, theta0: f64, epsilon: f64, regime: Regime) -> Result<u64> {
    let positive = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidArgument(format!(
                "{what} must be finite and > 0, got {v}"
            )))
        }
    };
    positive(m_g, "M_g")?;
    positive(theta0, "theta0")?;
    positive(epsilon, "epsilon")?;
    let lead = match regime {
        Regime::LipschitzObjective => {
            let m_f = m_f.ok_or_else(|| Error::InvalidArgument("M_f is required for the Lipschitz regime".into()))?;
            positive(m_f, "M_f")?;
            (m_f * m_f).max(m_g * m_g)
        }
        Regime::NonstandardGrowth => (m_g * m_g).max(1.0),
    };
    let n = (2.0 * lead * theta0 * theta0 / (epsilon * epsilon)).ceil();
    if n >= u64::MAX as f64 {
        return Err(Error::InvalidArgument("iteration bound overflows".into()));
    }
    Ok(n as u64)
}

/// `ε·‖∇f(x*)‖_* + L·ε²/2`: bound on `min_k f(xᵏ) − f*` after the
/// nonstandard-growth regime stops, for objectives with `L`-Lipschitz gradient
/// (or a max of such, with `L = max L_i`).
pub fn corollary_bound(grad_norm_at_opt: f64, lipschitz_gradient: f64, epsilon: f64) -> Result<f64> {
    if !(grad_norm_at_opt.is_finite() && grad_norm_at_opt >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gradient norm must be finite and >= 0, got {grad_norm_at_opt}"
        )));
    }
    if !(lipschitz_gradient.is_finite() && lipschitz_gradient > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "L must be finite and > 0, got {lipschitz_gradient}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and > 0, got {epsilon}"
        )));
    }
    Ok(epsilon * grad_norm_at_opt + lipschitz_gradient * epsilon * epsilon / 2.0)
}
