//! Manufactured solutions with closed-form derivatives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::ProblemData;
use crate::error::FcmError;
use crate::point::Vec2;
use crate::scalar::Real;
use crate::spline::FieldEval;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solution {
    /// `(sin 2x + x cos 3y) / 10`
    Trig,
    /// `x^2 - x y + y^2`
    Quadratic,
    /// `x^2 + y^2`
    Paraboloid,
}

impl Solution {
    pub fn eval<T: Real>(self, p: Vec2<T>) -> FieldEval<T> {
        let (x, y) = (p.x, p.y);
        let c = |v: f64| T::lit(v);
        match self {
            Solution::Trig => {
                let tenth = c(0.1);
                let (s2, c2) = ((c(2.0) * x).sin(), (c(2.0) * x).cos());
                let (s3, c3) = ((c(3.0) * y).sin(), (c(3.0) * y).cos());
                FieldEval {
                    value: tenth * (s2 + x * c3),
                    gradient: Vec2::new(tenth * (c(2.0) * c2 + c3), -tenth * c(3.0) * x * s3),
                    laplacian: -tenth * (c(4.0) * s2 + c(9.0) * x * c3),
                }
            }
            Solution::Quadratic => FieldEval {
                value: x * x - x * y + y * y,
                gradient: Vec2::new(c(2.0) * x - y, c(2.0) * y - x),
                laplacian: c(4.0),
            },
            Solution::Paraboloid => FieldEval {
                value: x * x + y * y,
                gradient: Vec2::new(c(2.0) * x, c(2.0) * y),
                laplacian: c(4.0),
            },
        }
    }

    /// `f = -Δu`, `g = u` and the exact solution.
    pub fn problem<T: Real>(self) -> ProblemData<T> {
        ProblemData::from_exact(Arc::new(move |p| self.eval(p)))
    }
}

impl FromStr for Solution {
    type Err = FcmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trig" => Ok(Solution::Trig),
            "quadratic" => Ok(Solution::Quadratic),
            "paraboloid" => Ok(Solution::Paraboloid),
            other => Err(FcmError::Configuration(format!("unknown solution `{other}`"))),
        }
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solution::Trig => "trig",
            Solution::Quadratic => "quadratic",
            Solution::Paraboloid => "paraboloid",
        })
    }
}
