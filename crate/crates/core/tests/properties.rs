use admd::{
    run, DualVector, FunctionalOracle, Point, Policy, ProblemInstance, ProxStructure, Regime, RunConfig, StepKind,
    StopReason, SymMatrix,
};
use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
enum Geo {
    Euclidean,
    Ball,
    Simplex,
}

fn geo() -> impl Strategy<Value = Geo> {
    prop_oneof![Just(Geo::Euclidean), Just(Geo::Ball), Just(Geo::Simplex)]
}

/// Builds the prox structure and maps a raw vector to a feasible point.
/// Simplex points from `interior` are strictly positive.
#[derive(Debug, Clone)]
struct Setup {
    prox: ProxStructure,
    geo: Geo,
    center: Vec<f64>,
    radius: f64,
}

impl Setup {
    fn new(geo: Geo, center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        let prox = match geo {
            Geo::Euclidean => ProxStructure::euclidean(Point::new(center.clone()).unwrap(), 1.0),
            Geo::Ball => {
                let c = Point::new(center.clone()).unwrap();
                ProxStructure::ball(c.clone(), radius, c, 1.0)
            }
            Geo::Simplex => ProxStructure::simplex(n, 1.0),
        }
        .unwrap();
        Self {
            prox,
            geo,
            center,
            radius,
        }
    }

    fn point(&self, raw: &[f64], interior: bool) -> Point {
        let v = match self.geo {
            Geo::Euclidean => raw.to_vec(),
            Geo::Ball => {
                let d: Vec<f64> = raw.iter().zip(&self.center).map(|(r, c)| r - c).collect();
                let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                let s = if norm > self.radius {
                    self.radius / norm * 0.999_999
                } else {
                    1.0
                };
                d.iter().zip(&self.center).map(|(x, c)| c + s * x).collect()
            }
            Geo::Simplex => {
                let floor = if interior { 1e-3 } else { 0.0 };
                let mut w: Vec<f64> = raw.iter().map(|r| (r.abs() / 3.0).max(floor)).collect();
                if w.iter().all(|x| *x == 0.0) {
                    w[0] = 1.0;
                }
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            }
        };
        Point::new(v).unwrap()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn setup_and_points(max_dim: usize, count: usize) -> impl Strategy<Value = (Setup, Vec<Vec<f64>>)> {
    (1..=max_dim, geo(), 0.1..5.0f64).prop_flat_map(move |(n, g, r)| {
        (vec(-2.0..2.0f64, n), vec(vec(-3.0..3.0f64, n), count))
            .prop_map(move |(center, pts)| (Setup::new(g, center, r), pts))
    })
}

fn psd(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    vec(vec(-1.0..1.0f64, n), n).prop_map(move |b| {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| b[k][i] * b[k][j]).sum()).collect())
            .collect()
    })
}

fn spectral_norm(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.symmetric_eigenvalues().iter().fold(0.0_f64, |a, e| a.max(e.abs()))
}

fn quadratic(rows: Vec<Vec<f64>>, b: Vec<f64>, alpha: f64) -> FunctionalOracle {
    FunctionalOracle::quadratic(SymMatrix::from_rows(rows).unwrap(), DualVector::new(b).unwrap(), alpha).unwrap()
}

/// One oracle of every kind in dimension `n`.
fn oracle(n: usize) -> impl Strategy<Value = FunctionalOracle> {
    let affine = (vec(-5.0..5.0f64, n), -5.0..5.0f64)
        .prop_map(|(a, b)| FunctionalOracle::affine(DualVector::new(a).unwrap(), b).unwrap());
    let quad = (psd(n), vec(-2.0..2.0f64, n), -2.0..2.0f64).prop_map(|(a, b, al)| quadratic(a, b, al));
    let sqrt = (psd(n), 0.1..3.0f64)
        .prop_map(|(q, s)| FunctionalOracle::sqrt_quadratic(SymMatrix::from_rows(q).unwrap(), s).unwrap());
    let abs = (vec(-3.0..3.0f64, n), -2.0..2.0f64, 0.1..3.0f64)
        .prop_map(|(a, sh, sc)| FunctionalOracle::abs_affine_plus(DualVector::new(a).unwrap(), sh, sc).unwrap());
    let leaf = prop_oneof![affine, quad, sqrt, abs];
    leaf.prop_recursive(2, 8, 4, |inner| {
        vec(inner, 1..4).prop_map(|c| FunctionalOracle::max_of(c).unwrap())
    })
}

fn oracle_and_points(count: usize) -> impl Strategy<Value = (FunctionalOracle, Vec<Vec<f64>>)> {
    (1usize..=6).prop_flat_map(move |n| (oracle(n), vec(vec(-3.0..3.0f64, n), count)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bregman_is_nonnegative_and_strongly_convex((s, pts) in setup_and_points(20, 2)) {
        let x = s.point(&pts[0], true);
        let y = s.point(&pts[1], false);
        let v = s.prox.bregman_divergence(&x, &y).unwrap();
        let diff: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let norm = s.prox.primal_norm(&diff).unwrap();
        prop_assert!(v >= 0.0);
        prop_assert!(v >= 0.5 * norm * norm - 1e-12 * (1.0 + v), "V = {v}, half norm sq = {}", 0.5 * norm * norm);
        prop_assert_eq!(s.prox.bregman_divergence(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn prox_value_is_minimized_at_anchor((s, pts) in setup_and_points(20, 1)) {
        let x = s.point(&pts[0], false);
        prop_assert_eq!(s.prox.prox_value(s.prox.anchor()).unwrap().abs() < 1e-15, true);
        prop_assert!(s.prox.prox_value(&x).unwrap() >= -1e-15);
    }

    #[test]
    fn three_point_inequality_holds(
        (s, pts, a, b) in (1usize..=8, geo(), 0.1..5.0f64).prop_flat_map(|(n, g, r)| {
            (vec(-2.0..2.0f64, n), vec(vec(-3.0..3.0f64, n), 2), psd(n), vec(-2.0..2.0f64, n))
                .prop_map(move |(c, p, a, b)| (Setup::new(g, c, r), p, a, b))
        }),
        h in 1e-6..=1.0f64,
    ) {
        let f = quadratic(a, b, 0.0);
        let x = s.point(&pts[0], false);
        let y = s.point(&pts[1], true);
        let (_, g) = f.evaluate(&y).unwrap();
        let z = s.prox.mirror_step(&y, &g, h).unwrap();
        let gd = s.prox.dual_norm(&g).unwrap();
        let diff: Vec<f64> = y.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let lhs = h * dot(g.as_slice(), &diff);
        let rhs = h * h / 2.0 * gd * gd + s.prox.bregman_divergence(&y, &x).unwrap()
            - s.prox.bregman_divergence(&z, &x).unwrap();
        prop_assert!(lhs <= rhs + 1e-9, "lhs {lhs} rhs {rhs}");
    }

    #[test]
    fn subgradient_inequality((f, pts) in oracle_and_points(2)) {
        let x = Point::new(pts[0].clone()).unwrap();
        let y = Point::new(pts[1].clone()).unwrap();
        let (fx, s) = f.evaluate(&x).unwrap();
        let fy = f.value(&y).unwrap();
        let d: Vec<f64> = pts[1].iter().zip(&pts[0]).map(|(a, b)| a - b).collect();
        prop_assert!(fy >= fx + dot(s.as_slice(), &d) - 1e-9, "f(y) {fy} f(x) {fx}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mirror_step_is_the_argmin(
        (s, pts) in setup_and_points(12, 102),
        h in 1e-3..=2.0f64,
    ) {
        let x = s.point(&pts[0], true);
        let p = DualVector::new(pts[1].clone()).unwrap();
        let u = s.prox.mirror_step(&x, &p, h).unwrap();
        prop_assert!(s.prox.contains(&u));
        let phi = |v: &Point| h * dot(p.as_slice(), v.as_slice()) + s.prox.bregman_divergence(&x, v).unwrap();
        let best = phi(&u);
        for raw in &pts[2..] {
            let v = s.point(raw, false);
            prop_assert!(best <= phi(&v) + 1e-9, "phi(u) {best} phi(v) {}", phi(&v));
        }
        // zero step keeps the point (the simplex renormalizes, so up to rounding)
        let same = s.prox.mirror_step(&x, &DualVector::zeros(x.dim()), h).unwrap();
        match s.geo {
            Geo::Simplex => prop_assert!(same.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() <= 1e-15)),
            _ => prop_assert_eq!(same, x),
        }
    }

    #[test]
    fn max_of_matches_children(
        (children, x) in (1usize..=6).prop_flat_map(|n| (vec(oracle(n), 1..5), vec(-3.0..3.0f64, n))),
    ) {
        let x = Point::new(x).unwrap();
        let f = FunctionalOracle::max_of(children.clone()).unwrap();
        let (v, s) = f.evaluate(&x).unwrap();
        let evals: Vec<_> = children.iter().map(|c| c.evaluate(&x).unwrap()).collect();
        let max = evals.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(v, max);
        let first = evals.iter().position(|e| e.0 == max).unwrap();
        prop_assert_eq!(&s, &evals[first].1);
    }

    #[test]
    fn quadratic_gradient_matches_finite_differences(
        (a, b, x) in (1usize..=6).prop_flat_map(|n| (psd(n), vec(-2.0..2.0f64, n), vec(-3.0..3.0f64, n))),
    ) {
        let f = quadratic(a, b, 0.5);
        let (_, g) = f.evaluate(&Point::new(x.clone()).unwrap()).unwrap();
        let step = 1e-6;
        for i in 0..x.len() {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += step;
            lo[i] -= step;
            let fd = (f.value(&Point::new(hi).unwrap()).unwrap() - f.value(&Point::new(lo).unwrap()).unwrap()) / (2.0 * step);
            prop_assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1.0), "coord {i}: fd {fd} grad {}", g[i]);
        }
    }

    #[test]
    fn quadratic_gradient_is_lipschitz_with_spectral_bound(
        (a, b, x, y) in (1usize..=6).prop_flat_map(|n| {
            (psd(n), vec(-2.0..2.0f64, n), vec(-3.0..3.0f64, n), vec(-3.0..3.0f64, n))
        }),
    ) {
        let l = spectral_norm(&a);
        let f = quadratic(a, b, 0.0);
        let (_, gx) = f.evaluate(&Point::new(x.clone()).unwrap()).unwrap();
        let (_, gy) = f.evaluate(&Point::new(y.clone()).unwrap()).unwrap();
        let dg = gx.iter().zip(gy.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let dx = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        prop_assert!(dg <= l * dx * (1.0 + 1e-9) + 1e-12, "{dg} > {l} * {dx}");
    }
}

/// Random instances with unit-norm affine objective and constraints and a
/// feasible start, solved at moderate accuracy.
fn small_instance() -> impl Strategy<Value = (ProblemInstance, ProxStructure)> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
        (vec(-1.0..1.0f64, n), vec(vec(-1.0..1.0f64, n), m), vec(0.0..1.0f64, m)).prop_map(move |(c, rows, bs)| {
            let unit = |v: Vec<f64>| {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
                DualVector::new(v.iter().map(|x| x / norm).collect()).unwrap()
            };
            let f = FunctionalOracle::affine(unit(c), 0.0)
                .unwrap()
                .with_lipschitz_value(1.0)
                .unwrap();
            let cs = rows
                .into_iter()
                .zip(bs)
                .map(|(r, b)| {
                    FunctionalOracle::affine(unit(r), -b)
                        .unwrap()
                        .with_lipschitz_value(1.0)
                        .unwrap()
                })
                .collect();
            let prox = ProxStructure::ball(Point::zeros(n), 1.0, Point::zeros(n), 1.0).unwrap();
            (ProblemInstance::new(f, cs).unwrap(), prox)
        })
    })
}

fn regime() -> impl Strategy<Value = Regime> {
    prop_oneof![Just(Regime::LipschitzObjective), Just(Regime::NonstandardGrowth)]
}

fn policy() -> impl Strategy<Value = Policy> {
    prop_oneof![
        Just(Policy::AggregateMax),
        Just(Policy::FirstViolated),
        Just(Policy::MaxViolation),
        Just(Policy::MinDualNormViolated)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_report_invariants((problem, prox) in small_instance(), regime in regime(), policy in policy()) {
        let eps = 0.1;
        let cfg = RunConfig::new(eps, regime, policy).unwrap().with_history(true);
        let r = run(&problem, &prox, &cfg).unwrap();
        prop_assert_eq!(r.total_steps, r.productive_count + r.nonproductive_count);
        prop_assert!(r.total_steps <= cfg.max_iterations);
        if r.stop_reason == StopReason::CriterionMet {
            prop_assert!(r.productive_count >= 1);
            prop_assert!(r.total_steps <= r.a_priori_bound.unwrap());
            prop_assert!(r.output_max_violation <= eps + 1e-9);
        }
        for s in r.history.as_ref().unwrap() {
            let m = s.grad_dual_norm;
            let scaled = match (regime, s.kind) {
                (Regime::NonstandardGrowth, StepKind::Productive) => s.step_size * m,
                _ => s.step_size * m * m,
            };
            prop_assert!((scaled / eps - 1.0).abs() <= 1e-12);
            if s.kind == StepKind::Productive {
                let x = s.iterate.as_ref().unwrap();
                let worst = problem.constraints().iter().map(|c| c.value(x).unwrap()).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(worst <= eps);
                prop_assert!(s.constraint_index.is_none());
            } else {
                prop_assert!(matches!(s.constraint_index, Some(i) if (1..=problem.constraints().len()).contains(&i)));
            }
        }
        // deterministic apart from wall time
        let again = run(&problem, &prox, &cfg).unwrap();
        prop_assert_eq!(again.history, r.history);
        prop_assert_eq!(again.output_point, r.output_point);
    }
}
