//! Adaptive mirror descent for convex minimization with many functional
//! constraints.
//!
//! The solver handles `min f(x)` over a simple set `X` subject to
//! `g_m(x) <= 0, m = 1..M`, using only subgradients. Step sizes and the
//! stopping rule adapt to the observed subgradient norms, so no Lipschitz
//! constants are needed. On steps where some constraint exceeds the target
//! accuracy the method may descend on any single violated constraint instead
//! of the full max-constraint, which is what [`Policy::FirstViolated`] does.
//!
//! ```
//! use admd::{build_example, run, Policy, Regime};
//!
//! let ex = build_example(4).unwrap();
//! let cfg = ex.run_config(Regime::LipschitzObjective, Policy::FirstViolated).unwrap();
//! let report = run(&ex.instance, &ex.prox().unwrap(), &cfg).unwrap();
//! assert!(report.converged());
//! assert!(report.output_objective - 5.0 <= 0.05);
//! ```

pub mod bench;
mod error;
pub mod geometry;
pub mod oracle;
pub mod problem_file;
pub mod solver;
mod vector;

pub use bench::{
    brute_force_optimum, build_example, run_bench, verify_example, verify_run, BenchCell, BruteForceResult, Check,
    GridSpec, PaperExample, PublishedCell, VerificationResult,
};
pub use error::{Error, Result};
pub use geometry::{Geometry, ProxStructure};
pub use oracle::{estimate_lipschitz, max_violation, Ball, FunctionalOracle, OracleKind, ProblemInstance, SymMatrix};
pub use problem_file::{load_problem, LoadedProblem, ProblemFile};
pub use solver::{
    corollary_bound, iteration_bound, run, select_constraint, vf_gap, Policy, Regime, RunConfig, Selection,
    SolverReport, StepKind, StepRecord, StopReason, DEFAULT_MAX_ITERATIONS,
};
pub use vector::{DualVector, Point};
