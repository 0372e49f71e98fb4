//! Intermittent interval maps with a neutral fixed point at 0.
//!
//! * `T`: `x ↦ x(1 + (2x)^{1/γ})` on `[0, 1/2)`, `x ↦ 2x − 1` on `[1/2, 1]`.
//! * `R`: `x ↦ x(1 + (κx)^{1/γ}) mod 1`.
//!
//! Both are induced on `Ω = [1/2, 1]`.

mod occupation;
mod ulam;

pub use occupation::{
    darling_kac_empirical, kac_partial_means, map_tied_down_estimate, return_tail, DarlingKac, MapTiedDown,
    ReturnTail,
};
pub use ulam::{infinite_density_profile, ulam_matrix, DensityProfile, GradedGrid, UlamMatrix};

use serde::Serialize;

use crate::error::{LabError, Result};

/// Left end of the inducing set `Ω = [1/2, 1]`.
pub const OMEGA_LO: f64 = 0.5;

/// Below this point orbits are advanced in double-double arithmetic.
const TINY: f64 = 1.0 / (1u64 << 30) as f64;

/// Grid size of the monotonicity check run at construction.
const MONOTONE_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MapFamily {
    T,
    R { kappa: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapSpec {
    family: MapFamily,
    gamma: f64,
    inv_gamma: f64,
    /// `1/γ` when it is an integer, so the power can use `powi`.
    inv_gamma_int: Option<i32>,
    kappa: f64,
}

/// One monotone piece of the map: on `[lo, hi)` the map is `x + shift(x)`,
/// with `shift(x) = x(κx)^{1/γ} − wrap` for the power pieces and `x − 1` for
/// the linear piece of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub wrap: f64,
    pub linear: bool,
}

impl MapSpec {
    pub fn t(gamma: f64) -> Result<Self> {
        Self::build(MapFamily::T, gamma, 2.0)
    }

    pub fn r(gamma: f64, kappa: u32) -> Result<Self> {
        if kappa < 2 {
            return Err(LabError::domain(format!("kappa must be an integer ≥ 2, got {kappa}")));
        }
        Self::build(MapFamily::R { kappa }, gamma, kappa as f64)
    }

    fn build(family: MapFamily, gamma: f64, kappa: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(LabError::domain(format!("map index must lie in (0, 1], got {gamma}")));
        }
        let inv_gamma = 1.0 / gamma;
        let rounded = inv_gamma.round();
        let inv_gamma_int = ((inv_gamma - rounded).abs() < 1e-12 && rounded <= 64.0).then_some(rounded as i32);
        let spec = MapSpec {
            family,
            gamma,
            inv_gamma,
            inv_gamma_int,
            kappa,
        };
        spec.check_monotone()?;
        Ok(spec)
    }

    pub fn family(&self) -> MapFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `x(κx)^{1/γ}`, the amount the left branch pushes `x` upwards.
    #[inline]
    pub fn excess(&self, x: f64) -> f64 {
        let kx = self.kappa * x;
        let p = match self.inv_gamma_int {
            Some(k) => kx.powi(k),
            None => kx.powf(self.inv_gamma),
        };
        x * p
    }

    /// Derivative of [`MapSpec::excess`].
    fn excess_slope(&self, x: f64) -> f64 {
        (1.0 + self.inv_gamma) * (self.kappa * x).powf(self.inv_gamma)
    }

    #[inline]
    fn step_unchecked(&self, x: f64) -> f64 {
        match self.family {
            MapFamily::T => {
                if x < OMEGA_LO {
                    x + self.excess(x)
                } else {
                    2.0 * x - 1.0
                }
            }
            MapFamily::R { .. } => {
                let y = x + self.excess(x);
                y - y.floor()
            }
        }
    }

    /// One application of the map.
    pub fn step(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(LabError::domain(format!("map argument must lie in [0, 1], got {x}")));
        }
        let y = self.step_unchecked(x);
        if !y.is_finite() || !(0.0..=1.0).contains(&y) {
            return Err(LabError::NumericalFailure {
                context: format!("map step at x = {x}"),
                achieved: y,
                requested: 1.0,
            });
        }
        Ok(y)
    }

    /// The monotone pieces of the map, in increasing order.
    pub(crate) fn branches(&self) -> Vec<Branch> {
        match self.family {
            MapFamily::T => vec![
                Branch {
                    lo: 0.0,
                    hi: OMEGA_LO,
                    wrap: 0.0,
                    linear: false,
                },
                Branch {
                    lo: OMEGA_LO,
                    hi: 1.0,
                    wrap: 0.0,
                    linear: true,
                },
            ],
            MapFamily::R { .. } => {
                let top = 1.0 + self.excess(1.0);
                let mut cuts = vec![0.0];
                let mut m = 1.0;
                while m < top {
                    cuts.push(self.solve_lift(m));
                    m += 1.0;
                }
                cuts.push(1.0);
                cuts.windows(2)
                    .enumerate()
                    .filter(|(_, w)| w[1] > w[0])
                    .map(|(i, w)| Branch {
                        lo: w[0],
                        hi: w[1],
                        wrap: i as f64,
                        linear: false,
                    })
                    .collect()
            }
        }
    }

    /// The point where `x + excess(x) = level`, by bisection.
    fn solve_lift(&self, level: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + self.excess(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        hi
    }

    /// `shift(x)` on the given branch.
    #[inline]
    pub(crate) fn shift(&self, b: &Branch, x: f64) -> f64 {
        if b.linear {
            x - 1.0
        } else {
            self.excess(x) - b.wrap
        }
    }

    fn shift_slope(&self, b: &Branch, x: f64) -> f64 {
        if b.linear {
            1.0
        } else {
            self.excess_slope(x)
        }
    }

    /// For `y` in the image of branch `b`, returns `δ = y − x` where `x` is
    /// the preimage of `y` in `b`. Working with the offset keeps preimages
    /// near 0 accurate to full relative precision.
    pub(crate) fn preimage_offset(&self, b: &Branch, y: f64) -> f64 {
        // g(δ) = δ − shift(y − δ) is increasing; bracket from x ∈ [lo, hi]
        let (mut lo, mut hi) = (y - b.hi, y - b.lo);
        let mut d = self.shift(b, y).clamp(lo, hi);
        for _ in 0..100 {
            let g = d - self.shift(b, y - d);
            if g == 0.0 {
                return d;
            }
            if g > 0.0 {
                hi = d;
            } else {
                lo = d;
            }
            let next = d - g / (1.0 + self.shift_slope(b, y - d));
            let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if (next - d).abs() <= 4.0 * f64::EPSILON * d.abs() || hi - lo <= f64::EPSILON * d.abs() {
                return next;
            }
            d = next;
        }
        d
    }

    fn check_monotone(&self) -> Result<()> {
        for b in self.branches() {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..MONOTONE_GRID {
                let x = b.lo + (b.hi - b.lo) * i as f64 / MONOTONE_GRID as f64;
                let y = x + self.shift(&b, x);
                if !(y >= prev) {
                    return Err(LabError::NumericalFailure {
                        context: format!("branch on [{}, {}) is not increasing at {x}", b.lo, b.hi),
                        achieved: y,
                        requested: prev,
                    });
                }
                prev = y;
            }
        }
        Ok(())
    }

    /// First return to `Ω` within `cap` iterations.
    pub fn first_return(&self, x: f64, cap: u64) -> Result<InducedOrbit> {
        if !(OMEGA_LO..=1.0).contains(&x) {
            return Err(LabError::domain(format!("first return needs a start in [1/2, 1], got {x}")));
        }
        let mut orbit = Orbit::new(self, x);
        for n in 1..=cap {
            orbit.advance();
            if orbit.in_omega() {
                return Ok(InducedOrbit {
                    start: x,
                    phi: n,
                    landing: orbit.value(),
                });
            }
        }
        Err(LabError::NonReturn { start: x, cap })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InducedOrbit {
    pub start: f64,
    pub phi: u64,
    pub landing: f64,
}

/// An orbit point carried as an unevaluated sum `hi + lo`; the low word is
/// only used while the orbit creeps away from the fixed point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Orbit<'a> {
    spec: &'a MapSpec,
    hi: f64,
    lo: f64,
}

impl<'a> Orbit<'a> {
    pub fn new(spec: &'a MapSpec, x: f64) -> Self {
        Orbit { spec, hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn advance(&mut self) {
        if self.hi < TINY {
            let inc = self.spec.excess(self.hi) + self.lo;
            let s = self.hi + inc;
            let bb = s - self.hi;
            self.lo = (self.hi - (s - bb)) + (inc - bb);
            self.hi = s;
        } else {
            let x = self.hi + self.lo;
            self.lo = 0.0;
            self.hi = self.spec.step_unchecked(x);
        }
    }

    #[inline]
    pub fn in_omega(&self) -> bool {
        self.hi >= OMEGA_LO
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_formulas() {
        let t = MapSpec::t(0.5).unwrap();
        assert_eq!(t.step(0.25).unwrap(), 0.3125);
        for g in [0.3, 0.5, 0.8, 1.0] {
            let t = MapSpec::t(g).unwrap();
            assert_eq!(t.step(0.75).unwrap(), 0.5);
            assert_eq!(t.step(0.0).unwrap(), 0.0);
            assert_eq!(t.step(0.5).unwrap(), 0.0);
            let left = t.step(0.5 - 1e-12).unwrap();
            assert!((left - 1.0).abs() < 1e-10, "{left}");
        }
        assert!(t.step(1.5).is_err());
        assert!(t.step(f64::NAN).is_err());
        assert!(MapSpec::t(0.0).is_err());
        assert!(MapSpec::t(1.2).is_err());
        assert!(MapSpec::r(0.5, 1).is_err());
    }

    #[test]
    fn r_family_wraps() {
        let r = MapSpec::r(0.5, 2).unwrap();
        let x: f64 = 0.6;
        let lift = x * (1.0 + (2.0 * x).powi(2));
        assert!((r.step(x).unwrap() - lift.fract()).abs() < 1e-15);
        let br = r.branches();
        // lift(1) = 5, so five full branches
        assert_eq!(br.len(), 5);
        for b in &br[1..] {
            let y = b.lo + r.shift(b, b.lo);
            assert!(y.abs() < 1e-12, "{b:?} {y}");
        }
    }

    #[test]
    fn preimages_invert_branches() {
        for spec in [MapSpec::t(0.5).unwrap(), MapSpec::t(0.8).unwrap(), MapSpec::r(0.6, 3).unwrap()] {
            for b in spec.branches() {
                for y in [1e-9, 0.1, 0.37, 0.5, 0.93] {
                    let d = spec.preimage_offset(&b, y);
                    let x = y - d;
                    if x < b.lo || x >= b.hi {
                        continue;
                    }
                    let back = x + spec.shift(&b, x);
                    assert!((back - y).abs() < 1e-14, "{b:?} y={y} back={back}");
                }
            }
        }
        // near the fixed point the offset keeps full relative precision
        let t = MapSpec::t(0.5).unwrap();
        let b = t.branches()[0];
        let y = 1e-10;
        let d = t.preimage_offset(&b, y);
        let exact = t.excess(y - d);
        assert!((d - exact).abs() <= 1e-15 * exact);
    }

    #[test]
    fn first_return_examples() {
        let t = MapSpec::t(0.5).unwrap();
        let o = t.first_return(0.75, 10).unwrap();
        assert_eq!((o.phi, o.landing), (1, 0.5));
        assert!(matches!(t.first_return(0.5, 1000), Err(LabError::NonReturn { cap: 1000, .. })));
        assert!(t.first_return(0.3, 10).is_err());
        // intermediate iterates avoid Ω
        let o = t.first_return(0.5 + 1e-3, 1_000_000).unwrap();
        let mut x = t.step(o.start).unwrap();
        for _ in 1..o.phi {
            assert!(x < OMEGA_LO);
            x = t.step(x).unwrap();
        }
        assert!(x >= OMEGA_LO && (x - o.landing).abs() < 1e-12);
    }

    #[test]
    fn double_double_creep() {
        // far below the threshold plain f64 would stall; the carried low word
        // accumulates the increments
        let t = MapSpec::t(0.5).unwrap();
        let x0 = 1e-12;
        let mut o = Orbit::new(&t, x0);
        let steps = 1000;
        for _ in 0..steps {
            o.advance();
        }
        assert_eq!(x0 + t.excess(x0), x0);
        let moved = (o.hi - x0) + o.lo;
        let expected = steps as f64 * t.excess(x0);
        assert!((moved - expected).abs() < 1e-6 * expected, "{moved} {expected}");
    }
}
