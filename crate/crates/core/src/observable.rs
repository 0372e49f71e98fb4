//! Test functions `g` applied to normalized occupation times.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::LabError;

/// How fast a test function may grow; anything without a declared growth
/// class is refused by the tied-down expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Growth {
    /// `|g| <= bound` everywhere on `[0, ∞)`.
    Bounded(f64),
    /// `|g(x)| <= C (1 + x^degree)`; integrable against laws with all moments.
    Polynomial(u32),
    Unbounded,
}

pub trait TestFunction: Sync {
    fn eval(&self, x: f64) -> f64;
    fn growth(&self) -> Growth;
}

/// The named catalogue used by fixtures and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    Const(f64),
    Identity,
    /// `x ↦ e^{-x}`
    ExpDecay,
    /// `x ↦ min(x, level)`
    Clamp(f64),
    /// `x ↦ x^j`
    Power(u32),
    /// indicator of the closed interval `[lo, hi]`
    Indicator(f64, f64),
}

impl TestFunction for Observable {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            Observable::Const(c) => c,
            Observable::Identity => x,
            Observable::ExpDecay => (-x).exp(),
            Observable::Clamp(level) => x.min(level),
            Observable::Power(j) => x.powi(j as i32),
            Observable::Indicator(lo, hi) => {
                if x >= lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn growth(&self) -> Growth {
        match *self {
            Observable::Const(c) => Growth::Bounded(c.abs()),
            Observable::Identity => Growth::Polynomial(1),
            Observable::ExpDecay => Growth::Bounded(1.0),
            Observable::Clamp(level) => Growth::Bounded(level.abs()),
            Observable::Power(0) => Growth::Bounded(1.0),
            Observable::Power(j) => Growth::Polynomial(j),
            Observable::Indicator(..) => Growth::Bounded(1.0),
        }
    }
}

impl Observable {
    pub fn is_zero(&self) -> bool {
        matches!(self, Observable::Const(c) if *c == 0.0)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Const(c) if *c == 1.0 => write!(f, "const"),
            Observable::Const(c) => write!(f, "const:{c}"),
            Observable::Identity => write!(f, "identity"),
            Observable::ExpDecay => write!(f, "exp-decay"),
            Observable::Clamp(l) if *l == 3.0 => write!(f, "clamp"),
            Observable::Clamp(l) => write!(f, "clamp:{l}"),
            Observable::Power(j) => write!(f, "power:{j}"),
            Observable::Indicator(lo, hi) => write!(f, "indicator:{lo}:{hi}"),
        }
    }
}

impl FromStr for Observable {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |i: usize| -> Result<f64, LabError> {
            args.get(i)
                .ok_or_else(|| LabError::domain(format!("observable `{s}` is missing an argument")))?
                .parse::<f64>()
                .map_err(|e| LabError::domain(format!("observable `{s}`: {e}")))
        };
        match head {
            "const" if args.is_empty() => Ok(Observable::Const(1.0)),
            "const" => Ok(Observable::Const(num(0)?)),
            "zero" => Ok(Observable::Const(0.0)),
            "identity" => Ok(Observable::Identity),
            "exp-decay" => Ok(Observable::ExpDecay),
            "clamp" if args.is_empty() => Ok(Observable::Clamp(3.0)),
            "clamp" => Ok(Observable::Clamp(num(0)?)),
            "power" => {
                let j = num(0)?;
                if j < 0.0 || j.fract() != 0.0 {
                    return Err(LabError::domain("power exponent must be a nonnegative integer"));
                }
                Ok(Observable::Power(j as u32))
            }
            "indicator" => Ok(Observable::Indicator(num(0)?, num(1)?)),
            _ => Err(LabError::domain(format!(
                "unknown observable `{s}` (expected const, identity, exp-decay, clamp)"
            ))),
        }
    }
}

/// A caller-supplied closure with a declared sup-norm bound.
pub struct BoundedFn<F> {
    f: F,
    bound: f64,
}

impl<F: Fn(f64) -> f64 + Sync> BoundedFn<F> {
    pub fn new(bound: f64, f: F) -> Self {
        Self { f, bound }
    }
}

impl<F: Fn(f64) -> f64 + Sync> TestFunction for BoundedFn<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.f)(x).clamp(-self.bound, self.bound)
    }

    fn growth(&self) -> Growth {
        Growth::Bounded(self.bound)
    }
}

/// A closure with no growth guarantee; accepted by pointwise sums, refused by
/// expectations over unbounded laws.
pub struct Unchecked<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> TestFunction for Unchecked<F> {
    fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    fn growth(&self) -> Growth {
        Growth::Unbounded
    }
}
