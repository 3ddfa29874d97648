//! Primal points and dual vectors.
//!
//! Both are thin wrappers over `Vec<f64>` whose constructors reject NaN and
//! infinities. They are kept as distinct types so a subgradient cannot be
//! passed where an iterate is expected.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! finite_vector {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(coords: Vec<f64>) -> Result<Self> {
                if coords.is_empty() {
                    return Err(Error::InvalidArgument(
                        concat!($what, " must have dimension >= 1").into(),
                    ));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite($what));
                }
                Ok(Self(coords))
            }

            pub fn from_slice(coords: &[f64]) -> Result<Self> {
                Self::new(coords.to_vec())
            }

            pub fn zeros(dim: usize) -> Self {
                assert!(dim >= 1, "dimension must be >= 1");
                Self(vec![0.0; dim])
            }

            pub fn filled(dim: usize, value: f64) -> Self {
                assert!(dim >= 1 && value.is_finite());
                Self(vec![value; dim])
            }

            /// Wraps coordinates produced internally, where finiteness has
            /// already been checked.
            pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
                debug_assert!(coords.iter().all(|c| c.is_finite()));
                Self(coords)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, f64> {
                self.0.iter()
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;
            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }
    };
}

finite_vector!(Point, "point");
finite_vector!(DualVector, "dual vector");

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert_eq!(Point::new(vec![1.0, f64::NAN]), Err(Error::NonFinite("point")));
        assert!(DualVector::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }

    #[test]
    fn serde_is_a_plain_array() {
        let p = Point::new(vec![1.0, -2.5]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.0,-2.5]");
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Point>("[]").is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(norm2(&[3.0, 4.0]), 5.0);
        assert_eq!(norm1(&[1.0, -2.0, 0.5]), 3.5);
        assert_eq!(norm_inf(&[1.0, -2.0, 0.5]), 2.0);
    }
}
