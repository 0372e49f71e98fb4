//! Power-law return sequences `a(t) = c·t^γ`, the rate `u(n) = γa(n)/n`, the
//! grid `x_{k,n} = n/a⁻¹(k)` and the weighted sums over that grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::observable::TestFunction;
use crate::quad::integrate;
use crate::stable::StableFamily;
use crate::sum::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVarying {
    gamma: f64,
    scale: f64,
}

impl RegVarying {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::domain(format!("index must lie in (0,1), got {gamma}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(LabError::domain(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { gamma, scale })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `a(t)`
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(LabError::domain(format!("a(t) needs t > 0, got {t}")));
        }
        Ok(self.at(t))
    }

    /// `a⁻¹(y) = (y/c)^{1/γ}`
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(LabError::domain(format!("a⁻¹(y) needs y > 0, got {y}")));
        }
        Ok(self.inv(y))
    }

    /// `u(n) = γ a(n) / n`
    pub fn u_rate(&self, n: u64) -> f64 {
        let n = n.max(1) as f64;
        self.gamma * self.at(n) / n
    }

    /// `u(t) = γ a(t) / t` at a real argument.
    pub fn u_rate_real(&self, t: f64) -> f64 {
        self.gamma * self.at(t) / t
    }

    pub fn grid(&self, k: u64, n: u64) -> GridPoint {
        GridPoint {
            k,
            n,
            x: n as f64 / self.inv(k as f64),
        }
    }

    /// `(a⁻¹(n+1) − a⁻¹(n))·γn / a⁻¹(n)`, which tends to 1.
    pub fn smoothness_ratio(&self, n: u64) -> f64 {
        let nf = n as f64;
        // a⁻¹(n+1)/a⁻¹(n) − 1 = (1 + 1/n)^{1/γ} − 1
        let step = ((1.0 / self.gamma) * (1.0 / nf).ln_1p()).exp_m1();
        step * self.gamma * nf
    }

    /// Ratio of `1/a⁻¹(k)` to `u(n)(x_{k,n} − x_{k+1,n})/x_{k,n}^γ`; tends to 1
    /// uniformly on compact `x`-windows.
    pub fn grid_identity_ratio(&self, k: u64, n: u64) -> f64 {
        let x0 = self.grid(k, n).x;
        let x1 = self.grid(k + 1, n).x;
        let lhs = 1.0 / self.inv(k as f64);
        let rhs = self.u_rate(n) * (x0 - x1) / x0.powf(self.gamma);
        lhs / rhs
    }

    /// Indices `k ≥ 1` (capped at `n`) whose grid point lies in `[lo, hi]`.
    pub fn window_indices(&self, n: u64, lo: f64, hi: f64) -> std::ops::RangeInclusive<u64> {
        // x_{k,n} ∈ [lo,hi] ⇔ a(n/hi) ≤ k ≤ a(n/lo)
        let nf = n as f64;
        let mut first = self.at(nf / hi).ceil().max(1.0) as u64;
        let mut last = (self.at(nf / lo).floor() as u64).min(n);
        // guard the rounding at both ends
        while first > 1 && self.grid(first - 1, n).x <= hi {
            first -= 1;
        }
        while first <= last && self.grid(first, n).x > hi {
            first += 1;
        }
        while last < n && self.grid(last + 1, n).x >= lo {
            last += 1;
        }
        while last >= first && last > 0 && self.grid(last, n).x < lo {
            last -= 1;
        }
        first..=last
    }

    fn at(&self, t: f64) -> f64 {
        self.scale * t.powf(self.gamma)
    }

    fn inv(&self, y: f64) -> f64 {
        (y / self.scale).powf(1.0 / self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: u64,
    pub n: u64,
    pub x: f64,
}

/// A half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(LabError::domain(format!("bad interval [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    /// Number of integers in the interval.
    pub fn lattice_count(&self) -> u64 {
        let first = self.lo.ceil();
        let last = (self.hi.ceil() - 1.0).max(first - 1.0);
        (last - first + 1.0).max(0.0) as u64
    }
}

/// Outcome of a sum over a grid window; an empty window is reported rather
/// than silently returning 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowSum {
    Empty,
    Sum { value: f64, terms: u64 },
}

impl WindowSum {
    pub fn value(&self) -> Option<f64> {
        match self {
            WindowSum::Empty => None,
            WindowSum::Sum { value, .. } => Some(*value),
        }
    }
}

/// Parameters of the lattice weighted sum over the grid.
#[derive(Debug, Clone, Copy)]
pub struct LatticeWindow {
    pub p: u64,
    pub xi: i64,
    /// residue window `I ⊂ [0, p)`
    pub residues: Interval,
    /// grid window `[c, d]`
    pub c: f64,
    pub d: f64,
}

impl LatticeWindow {
    pub fn aperiodic(c: f64, d: f64) -> Self {
        Self {
            p: 1,
            xi: 1,
            residues: Interval { lo: 0.0, hi: 1.0 },
            c,
            d,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(LabError::domain("period must be positive"));
        }
        if gcd(self.xi.unsigned_abs(), self.p) != 1 {
            return Err(LabError::domain(format!(
                "drift {} and period {} must be coprime",
                self.xi, self.p
            )));
        }
        if !(self.c > 0.0 && self.c < self.d) {
            return Err(LabError::domain(format!("need 0 < c < d, got [{}, {}]", self.c, self.d)));
        }
        if self.residues.lo < 0.0 || self.residues.hi > self.p as f64 {
            return Err(LabError::domain("residue window must lie in [0, p)"));
        }
        Ok(())
    }

    fn hits(&self, n: u64, k: u64) -> bool {
        let r = (n as i128 - k as i128 * self.xi as i128).rem_euclid(self.p as i128);
        self.residues.contains(r as f64)
    }
}

/// `(1/u(n)) Σ_{k: x_{k,n}∈[c,d]} g(x^{-γ}) p f_Z(x) / a⁻¹(k) · 1_{I+pℤ}(n − kξ)`.
pub fn lemma22_sum(
    a: &RegVarying,
    family: &StableFamily,
    window: &LatticeWindow,
    g: &dyn TestFunction,
    n: u64,
) -> Result<WindowSum> {
    window.validate()?;
    if n == 0 {
        return Err(LabError::domain("n must be positive"));
    }
    let ks = a.window_indices(n, window.c, window.d);
    if ks.is_empty() {
        return Ok(WindowSum::Empty);
    }
    let gamma = family.gamma();
    let p = window.p as f64;
    let terms: Vec<f64> = ks
        .clone()
        .into_par_iter()
        .map(|k| -> Result<f64> {
            if !window.hits(n, k) {
                return Ok(0.0);
            }
            let x = a.grid(k, n).x;
            let w = g.eval(x.powf(-gamma));
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(w * p * family.density(x)? / a.inv(k as f64))
        })
        .collect::<Result<_>>()?;
    let count = terms.len() as u64;
    Ok(WindowSum::Sum {
        value: compensated_sum(terms) / a.u_rate(n),
        terms: count,
    })
}

/// `|I| · ∫_c^d g(x^{-γ}) x^{-γ} f_Z(x) dx`, the limit of [`lemma22_sum`];
/// `interval_length` is the Haar measure of the residue window.
pub fn lemma22_limit(
    family: &StableFamily,
    g: &dyn TestFunction,
    c: f64,
    d: f64,
    interval_length: f64,
) -> Result<f64> {
    if !(c > 0.0 && c < d) {
        return Err(LabError::domain(format!("need 0 < c < d, got [{c}, {d}]")));
    }
    if interval_length == 0.0 {
        return Ok(0.0);
    }
    let gamma = family.gamma();
    let err = std::cell::Cell::new(None);
    let f = |x: f64| {
        let y = x.powf(-gamma);
        let w = g.eval(y);
        if w == 0.0 {
            return 0.0;
        }
        match family.density(x) {
            Ok(v) => w * y * v,
            Err(e) => {
                err.set(Some(e));
                0.0
            }
        }
    };
    // split at the crossover so each piece sees one density regime
    let cfg = crate::quad::QuadConfig::with_tolerances(1e-14, 1e-11);
    let mut total = 0.0;
    let mut lo = c;
    for b in [family.crossover() * family.z_scale(), 1.0, 10.0] {
        if b > lo && b < d {
            total += integrate(f, lo, b, &cfg)?.value;
            lo = b;
        }
    }
    total += integrate(f, lo, d, &cfg)?.value;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(interval_length * total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquidistReport {
    /// `Σ_n w_n 1_U(x0 + nξ mod p)`
    pub value: f64,
    /// `(Σ w)·|U|/p`
    pub comparison: f64,
    pub total_weight: f64,
    /// `Σ |w_n − w_{n+1}|`, reported against `total_weight`
    pub variation: f64,
}

/// Weighted visits of the rotation `n ↦ x0 + nξ mod p` to `U ⊂ [0, p)`;
/// `weights[n]` is the weight of time `n`, starting at `n = 0`.
pub fn equidist_average(weights: &[f64], xi: f64, p: f64, u: Interval, x0: f64) -> Result<EquidistReport> {
    if !(p > 0.0) {
        return Err(LabError::domain("period must be positive"));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(LabError::domain("weights must be nonnegative"));
    }
    let value = compensated_sum(weights.iter().enumerate().map(|(n, &w)| {
        if w == 0.0 {
            return 0.0;
        }
        let pos = (x0 + n as f64 * xi).rem_euclid(p);
        if u.contains(pos) {
            w
        } else {
            0.0
        }
    }));
    let total_weight = compensated_sum(weights.iter().copied());
    let mut variation = compensated_sum(weights.windows(2).map(|w| (w[0] - w[1]).abs()));
    if let Some(last) = weights.last() {
        variation += last;
    }
    let covered = (u.hi.min(p) - u.lo.max(0.0)).max(0.0);
    Ok(EquidistReport {
        value,
        comparison: total_weight * covered / p,
        total_weight,
        variation,
    })
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
