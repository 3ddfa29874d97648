//! Prox structures: the norm/dual-norm pair, the prox function `d`, its
//! Bregman divergence and the closed-form mirror step for each supported
//! feasible set.
//!
//! | geometry                 | feasible set          | primal norm | `d(x)`                    |
//! |--------------------------|-----------------------|-------------|---------------------------|
//! | `EuclideanUnconstrained` | `R^n`                 | `l2`        | `½‖x − anchor‖²`          |
//! | `EuclideanBall`          | `‖x − c‖ ≤ r`         | `l2`        | `½‖x − anchor‖²`          |
//! | `EntropySimplex`         | probability simplex   | `l1`        | `Σ xᵢ ln xᵢ + ln n`       |
//!
//! In every case the anchor is the minimizer of `d` over the feasible set and
//! `d(anchor) = 0`. For the simplex the anchor is the uniform distribution.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector::{norm1, norm2, norm_inf, DualVector, Point};

/// Relative slack allowed when checking that a projected point is feasible.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    EuclideanUnconstrained,
    EuclideanBall { center: Point, radius: f64 },
    EntropySimplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxStructure {
    geometry: Geometry,
    anchor: Point,
    theta0: f64,
}

fn check_theta0(theta0: f64) -> Result<()> {
    if theta0.is_finite() && theta0 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "theta0 must be finite and > 0, got {theta0}"
        )))
    }
}

impl ProxStructure {
    /// Euclidean prox on the whole space, `d(x) = ½‖x − anchor‖²`.
    pub fn euclidean(anchor: Point, theta0: f64) -> Result<Self> {
        check_theta0(theta0)?;
        Ok(Self {
            geometry: Geometry::EuclideanUnconstrained,
            anchor,
            theta0,
        })
    }

    /// Euclidean prox restricted to a closed ball. The anchor must lie in the ball.
    pub fn ball(center: Point, radius: f64, anchor: Point, theta0: f64) -> Result<Self> {
        check_theta0(theta0)?;
        check_dim(center.dim(), anchor.dim())?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be finite and > 0, got {radius}"
            )));
        }
        let s = Self {
            geometry: Geometry::EuclideanBall { center, radius },
            anchor,
            theta0,
        };
        if !s.contains(&s.anchor) {
            return Err(Error::Domain("anchor lies outside the ball".into()));
        }
        Ok(s)
    }

    /// Entropy prox on the probability simplex of dimension `dim`.
    pub fn simplex(dim: usize, theta0: f64) -> Result<Self> {
        check_theta0(theta0)?;
        if dim == 0 {
            return Err(Error::InvalidArgument("simplex dimension must be >= 1".into()));
        }
        let anchor = Point::filled(dim, 1.0 / dim as f64);
        Ok(Self {
            geometry: Geometry::EntropySimplex,
            anchor,
            theta0,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// The start point `x⁰ = argmin d`.
    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn with_theta0(mut self, theta0: f64) -> Result<Self> {
        check_theta0(theta0)?;
        self.theta0 = theta0;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        check_dim(self.dim(), v.len())
    }

    /// Norm of a primal vector (a difference of points).
    pub fn primal_norm(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(match self.geometry {
            Geometry::EntropySimplex => norm1(v),
            _ => norm2(v),
        })
    }

    pub fn dual_norm(&self, p: &DualVector) -> Result<f64> {
        self.check(p.as_slice())?;
        Ok(self.dual_norm_slice(p.as_slice()))
    }

    pub(crate) fn dual_norm_slice(&self, p: &[f64]) -> f64 {
        match self.geometry {
            Geometry::EntropySimplex => norm_inf(p),
            _ => norm2(p),
        }
    }

    /// Feasibility of `x` for the geometry, with relative slack [`FEASIBILITY_TOL`].
    pub fn contains(&self, x: &Point) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        match &self.geometry {
            Geometry::EuclideanUnconstrained => true,
            Geometry::EuclideanBall { center, radius } => {
                dist2(x.as_slice(), center.as_slice()) <= radius * (1.0 + FEASIBILITY_TOL)
            }
            Geometry::EntropySimplex => {
                x.iter().all(|&v| v >= 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= FEASIBILITY_TOL * x.dim() as f64
            }
        }
    }

    /// The prox function `d(x)`.
    pub fn prox_value(&self, x: &Point) -> Result<f64> {
        self.check(x.as_slice())?;
        Ok(match self.geometry {
            Geometry::EntropySimplex => {
                let n = self.dim() as f64;
                x.iter().map(|&v| xlogx(v)).sum::<f64>() + n.ln()
            }
            _ => 0.5 * dist2_sq(x.as_slice(), self.anchor.as_slice()),
        })
    }

    /// Bregman divergence `V(x, y) = d(y) − d(x) − ⟨∇d(x), y − x⟩`.
    ///
    /// The first argument is where `∇d` is taken. On the simplex this is the
    /// Kullback-Leibler divergence `Σ yᵢ ln(yᵢ/xᵢ)` and `x` must be strictly
    /// positive.
    pub fn bregman_divergence(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x.as_slice())?;
        self.check(y.as_slice())?;
        match self.geometry {
            Geometry::EntropySimplex => {
                check_simplex_anchor(x.as_slice())?;
                if y.iter().any(|&v| v < 0.0) {
                    return Err(Error::Domain("simplex point has a negative coordinate".into()));
                }
                let v = x
                    .iter()
                    .zip(y.iter())
                    .map(|(&xi, &yi)| if yi == 0.0 { 0.0 } else { yi * (yi / xi).ln() })
                    .sum::<f64>();
                // KL is nonnegative; clip rounding noise around zero.
                Ok(v.max(0.0))
            }
            _ => Ok(0.5 * dist2_sq(x.as_slice(), y.as_slice())),
        }
    }

    /// `Mirr_x(h·p) = argmin_{u ∈ X} { ⟨h·p, u⟩ + V(x, u) }`.
    pub fn mirror_step(&self, x: &Point, p: &DualVector, h: f64) -> Result<Point> {
        self.check(x.as_slice())?;
        self.check(p.as_slice())?;
        let mut out = vec![0.0; self.dim()];
        self.mirror_step_into(x.as_slice(), p.as_slice(), h, &mut out)?;
        Ok(Point::from_vec_unchecked(out))
    }

    /// Slice form of [`mirror_step`](Self::mirror_step) writing into `out`.
    /// Dimensions are the caller's responsibility.
    pub(crate) fn mirror_step_into(&self, x: &[f64], p: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and > 0, got {h}"
            )));
        }
        match &self.geometry {
            Geometry::EuclideanUnconstrained => {
                for ((o, &xi), &pi) in out.iter_mut().zip(x).zip(p) {
                    *o = xi - h * pi;
                }
            }
            Geometry::EuclideanBall { center, radius } => {
                for ((o, &xi), &pi) in out.iter_mut().zip(x).zip(p) {
                    *o = xi - h * pi;
                }
                project_ball(out, center.as_slice(), *radius);
            }
            Geometry::EntropySimplex => {
                check_simplex_anchor(x)?;
                let mut shift = f64::NEG_INFINITY;
                for ((o, &xi), &pi) in out.iter_mut().zip(x).zip(p) {
                    *o = xi.ln() - h * pi;
                    shift = shift.max(*o);
                }
                let mut total = 0.0;
                for o in out.iter_mut() {
                    *o = (*o - shift).exp();
                    total += *o;
                }
                for o in out.iter_mut() {
                    *o /= total;
                }
                let s: f64 = out.iter().sum();
                if (s - 1.0).abs() > FEASIBILITY_TOL {
                    for o in out.iter_mut() {
                        *o /= s;
                    }
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mirror step"));
        }
        Ok(())
    }
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    dist2_sq(a, b).sqrt()
}

fn check_simplex_anchor(x: &[f64]) -> Result<()> {
    if x.iter().all(|&v| v > 0.0) {
        Ok(())
    } else {
        Err(Error::Domain(
            "entropy gradient undefined at a simplex point with a zero coordinate".into(),
        ))
    }
}

fn project_ball(y: &mut [f64], center: &[f64], radius: f64) {
    for _ in 0..2 {
        let r = dist2(y, center);
        if r <= radius * (1.0 + FEASIBILITY_TOL) {
            return;
        }
        let scale = radius / r;
        for (yi, &ci) in y.iter_mut().zip(center) {
            *yi = ci + (*yi - ci) * scale;
        }
    }
}

/// Inner product of a dual vector with a primal difference `x − y`.
pub(crate) fn pair_diff(p: &[f64], x: &[f64], y: &[f64]) -> f64 {
    p.iter().zip(x.iter().zip(y)).map(|(pi, (xi, yi))| pi * (xi - yi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }
    fn dv(v: &[f64]) -> DualVector {
        DualVector::from_slice(v).unwrap()
    }

    fn geometries(dim: usize) -> Vec<ProxStructure> {
        vec![
            ProxStructure::euclidean(Point::zeros(dim), 1.0).unwrap(),
            ProxStructure::ball(Point::zeros(dim), 2.0, Point::zeros(dim), 1.0).unwrap(),
            ProxStructure::simplex(dim, 1.0).unwrap(),
        ]
    }

    #[test]
    fn dual_norm_examples() {
        let e3 = ProxStructure::euclidean(Point::zeros(3), 1.0).unwrap();
        assert_eq!(e3.dual_norm(&dv(&[0.0, 0.0, 0.0])).unwrap(), 0.0);
        let e2 = ProxStructure::euclidean(Point::zeros(2), 1.0).unwrap();
        assert_eq!(e2.dual_norm(&dv(&[3.0, 4.0])).unwrap(), 5.0);
        let s3 = ProxStructure::simplex(3, 1.0).unwrap();
        assert_eq!(s3.dual_norm(&dv(&[1.0, -2.0, 0.5])).unwrap(), 2.0);
    }

    #[test]
    fn dual_norm_rejects_dimension_mismatch() {
        let e2 = ProxStructure::euclidean(Point::zeros(2), 1.0).unwrap();
        assert_eq!(
            e2.dual_norm(&dv(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn bregman_examples() {
        for g in geometries(2) {
            assert_eq!(g.bregman_divergence(&pt(&[0.3, 0.7]), &pt(&[0.3, 0.7])).unwrap(), 0.0);
        }
        let e = ProxStructure::euclidean(Point::zeros(2), 1.0).unwrap();
        assert_eq!(e.bregman_divergence(&pt(&[0.0, 0.0]), &pt(&[1.0, 2.0])).unwrap(), 2.5);
        // 0.25 ln 0.5 + 0.75 ln 1.5, evaluated at 30 digits.
        let s = ProxStructure::simplex(2, 1.0).unwrap();
        let v = s.bregman_divergence(&pt(&[0.5, 0.5]), &pt(&[0.25, 0.75])).unwrap();
        assert!((v - 0.130_812_035_941_136_96).abs() < 1e-15, "{v}");
    }

    #[test]
    fn bregman_rejects_zero_simplex_anchor() {
        let s = ProxStructure::simplex(2, 1.0).unwrap();
        assert!(matches!(
            s.bregman_divergence(&pt(&[0.0, 1.0]), &pt(&[0.5, 0.5])),
            Err(Error::Domain(_))
        ));
        // a zero in the second argument is fine
        assert!(s.bregman_divergence(&pt(&[0.5, 0.5]), &pt(&[0.0, 1.0])).is_ok());
    }

    #[test]
    fn mirror_step_examples() {
        let e = ProxStructure::euclidean(Point::zeros(2), 1.0).unwrap();
        let x = pt(&[1.0, 1.0]);
        assert_eq!(e.mirror_step(&x, &dv(&[0.0, 0.0]), 0.7).unwrap(), x);
        // closed form, confirmed by a grid search over u
        assert_eq!(e.mirror_step(&x, &dv(&[2.0, -1.0]), 0.5).unwrap(), pt(&[0.0, 1.5]));

        // KKT solution of the entropic argmin, confirmed by a grid search
        let s = ProxStructure::simplex(2, 1.0).unwrap();
        let u = s.mirror_step(&pt(&[0.5, 0.5]), &dv(&[4f64.ln(), 0.0]), 1.0).unwrap();
        assert!((u[0] - 0.2).abs() < 1e-15 && (u[1] - 0.8).abs() < 1e-15, "{u:?}");
    }

    #[test]
    fn zero_step_is_identity_in_every_geometry() {
        for g in geometries(3) {
            let x = g.anchor().clone();
            let u = g.mirror_step(&x, &DualVector::zeros(3), 1.0).unwrap();
            for i in 0..3 {
                assert!((u[i] - x[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ball_step_projects_radially() {
        let b = ProxStructure::ball(pt(&[1.0, 0.0]), 1.0, pt(&[1.0, 0.0]), 1.0).unwrap();
        let u = b.mirror_step(&pt(&[1.0, 0.0]), &dv(&[-3.0, -4.0]), 1.0).unwrap();
        assert!((u[0] - 1.6).abs() < 1e-12 && (u[1] - 0.8).abs() < 1e-12);
        assert!(b.contains(&u));
    }

    #[test]
    fn mirror_step_rejects_bad_step() {
        let e = ProxStructure::euclidean(Point::zeros(1), 1.0).unwrap();
        for h in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(e.mirror_step(&pt(&[0.0]), &dv(&[1.0]), h).is_err());
        }
        assert!(e.mirror_step(&pt(&[0.0, 1.0]), &dv(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn prox_vanishes_at_anchor() {
        for g in geometries(4) {
            assert!(g.prox_value(g.anchor()).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(ProxStructure::euclidean(Point::zeros(1), 0.0).is_err());
        assert!(ProxStructure::ball(Point::zeros(2), -1.0, Point::zeros(2), 1.0).is_err());
        assert!(ProxStructure::ball(Point::zeros(2), 1.0, pt(&[3.0, 0.0]), 1.0).is_err());
        assert!(ProxStructure::simplex(0, 1.0).is_err());
    }
}
