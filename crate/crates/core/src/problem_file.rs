//! TOML problem-definition files.
//!
//! ```toml
//! dimension = 2
//! x0 = [0.0, 0.0]
//! theta0 = 2.0
//! epsilon = 0.1
//!
//! [geometry]             # optional; default `euclidean` anchored at x0
//! kind = "ball"          # euclidean | ball | simplex
//! center = [0.0, 0.0]
//! radius = 2.0
//!
//! [objective]
//! kind = "affine"        # affine | quadratic | sqrt-quadratic | abs-affine-plus | max-of
//! a = [1.0, 1.0]
//! b = 0.0
//!
//! [[constraints]]
//! kind = "affine"
//! a = [1.0, 0.0]
//! b = -1.0
//! lipschitz_value = 1.0  # optional, also lipschitz_gradient
//!
//! [known_optimum]        # optional
//! point = [-1.4142135623730951, -1.4142135623730951]
//! value = -2.8284271247461903
//! ```
//!
//! Parameters per kind: `affine {a, b}`, `quadratic {a (rows), b, alpha}` for
//! `½⟨Ax,x⟩ − ⟨b,x⟩ + α`, `sqrt-quadratic {q (rows), scale}`,
//! `abs-affine-plus {a, shift, scale}`, `max-of {children = [...]}`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::ProxStructure;
use crate::oracle::{FunctionalOracle, ProblemInstance};
use crate::vector::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometrySpec {
    Euclidean,
    Ball { center: Point, radius: f64 },
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimumSpec {
    pub point: Point,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub objective: FunctionalOracle,
    pub constraints: Vec<FunctionalOracle>,
    pub x0: Point,
    pub theta0: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_optimum: Option<OptimumSpec>,
}

/// A parsed and validated problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem {
    pub instance: ProblemInstance,
    pub prox: ProxStructure,
    pub epsilon: f64,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(self) -> Result<LoadedProblem> {
        if self.dimension == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        self.objective.validate()?;
        check_dim(self.dimension, self.objective.dim())?;
        for c in &self.constraints {
            c.validate()?;
            check_dim(self.dimension, c.dim())?;
        }
        check_dim(self.dimension, self.x0.dim())?;
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        let prox = match self.geometry.unwrap_or(GeometrySpec::Euclidean) {
            GeometrySpec::Euclidean => ProxStructure::euclidean(self.x0, self.theta0)?,
            GeometrySpec::Ball { center, radius } => ProxStructure::ball(center, radius, self.x0, self.theta0)?,
            GeometrySpec::Simplex => {
                let p = ProxStructure::simplex(self.dimension, self.theta0)?;
                if p.anchor()
                    .iter()
                    .zip(self.x0.iter())
                    .any(|(a, b)| (a - b).abs() > 1e-12)
                {
                    return Err(Error::InvalidArgument(
                        "simplex geometry starts at the uniform point; x0 must match".into(),
                    ));
                }
                p
            }
        };
        let mut instance = ProblemInstance::new(self.objective, self.constraints)?;
        if let Some(opt) = self.known_optimum {
            instance = instance.with_known_optimum(opt.point, opt.value)?;
        }
        Ok(LoadedProblem {
            instance,
            prox,
            epsilon: self.epsilon,
        })
    }
}

/// Parses and validates problem-file text.
pub fn load_problem(text: &str) -> Result<LoadedProblem> {
    ProblemFile::parse(text)?.load()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Geometry;

    const DISK: &str = r#"
dimension = 2
x0 = [0.0, 0.0]
theta0 = 2.0
epsilon = 0.1

[geometry]
kind = "ball"
center = [0.0, 0.0]
radius = 2.0

[objective]
kind = "affine"
a = [1.0, 1.0]
b = 0.0

[[constraints]]
kind = "affine"
a = [1.0, 0.0]
b = -1.0

[[constraints]]
kind = "affine"
a = [0.0, 1.0]
b = -1.0
lipschitz_value = 1.0
"#;

    #[test]
    fn parses_disk_problem() {
        let p = load_problem(DISK).unwrap();
        assert_eq!(p.instance.dimension(), 2);
        assert_eq!(p.instance.constraints().len(), 2);
        assert_eq!(p.instance.constraints()[1].lipschitz_value(), Some(1.0));
        assert!(matches!(p.prox.geometry(), Geometry::EuclideanBall { radius, .. } if *radius == 2.0));
        assert_eq!(p.epsilon, 0.1);
    }

    #[test]
    fn nested_max_of_and_exponents() {
        let text = r#"
dimension = 1
x0 = [1e0]
theta0 = 1.5E0
epsilon = 5e-2
objective = { kind = "max-of", children = [
    { kind = "affine", a = [1.0], b = 0.0 },
    { kind = "abs-affine-plus", a = [2.0], shift = 1.0, scale = 0.5 },
] }
constraints = [{ kind = "quadratic", a = [[2.0]], b = [0.0], alpha = -4.0 }]
"#;
        let p = load_problem(text).unwrap();
        assert_eq!(p.epsilon, 0.05);
        assert_eq!(p.instance.objective().value(&Point::filled(1, 3.0)).unwrap(), 4.0);
    }

    #[test]
    fn rejects_corrupt_and_inconsistent_files() {
        assert!(matches!(load_problem("dimension = [oops"), Err(Error::Parse(_))));
        assert!(matches!(
            load_problem(&DISK.replace("kind = \"affine\"\na = [1.0, 1.0]", "kind = \"bogus\"\na = [1.0, 1.0]")),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            load_problem(&DISK.replace("dimension = 2", "dimension = 3")),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(load_problem(&DISK.replace("epsilon = 0.1", "epsilon = -0.1")).is_err());
        assert!(load_problem(&DISK.replace("x0 = [0.0, 0.0]", "x0 = [5.0, 0.0]")).is_err());
        assert!(load_problem(&DISK.replace("theta0 = 2.0", "theta0 = 2.0\nextra = 1")).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let f = ProblemFile::parse(DISK).unwrap();
        let again = ProblemFile::parse(&f.to_toml().unwrap()).unwrap();
        assert_eq!(f, again);
    }
}
