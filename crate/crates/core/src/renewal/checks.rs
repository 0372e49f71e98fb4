//! Renewal-theorem diagnostics built on exact partial-sum distributions.
//!
//! In the periodic case `P(φ_k = n) > 0` only when `n ≡ kξ (mod p)`, so for a
//! fixed `n` just one order in `p` contributes; each contributing order
//! carries the local-limit factor `p`, and the two cancel. The renewal sum
//! `Σ_k P(φ_k = n)` is therefore compared against `u(n)` itself on every
//! reachable `n`.

use num_complex::Complex64;
use serde::Serialize;

use super::law::LatticeLaw;
use super::table::{ConvolutionTable, RowView, TiedSums};
use crate::error::{LabError, Result};
use crate::observable::TestFunction;
use crate::regvar::RegVarying;
use crate::special::UnitCirclePolylog;
use crate::stable::StableFamily;
use crate::sum::Neumaier;

/// A per-`n` quantity that is either meaningful or structurally zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reach<T> {
    /// No partial sum can equal `n`; the tied sum is exactly 0.
    Unreachable,
    Reached(T),
}

impl<T: Copy> Reach<T> {
    pub fn reached(&self) -> Option<T> {
        match self {
            Reach::Unreachable => None,
            Reach::Reached(v) => Some(*v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SrtPoint {
    pub tied_sum: f64,
    pub u_n: f64,
    pub ratio: f64,
}

fn srt_from(law: &LatticeLaw, a: &RegVarying, n: u64, tied_sum: f64) -> Reach<SrtPoint> {
    if !law.reachable(n) {
        return Reach::Unreachable;
    }
    let u_n = a.u_rate(n);
    Reach::Reached(SrtPoint {
        tied_sum,
        u_n,
        ratio: tied_sum / u_n,
    })
}

/// `Σ_{k ≤ n} P(φ_k = n)` against `u(n) = γa(n)/n`.
pub fn srt_profile(table: &ConvolutionTable, a: &RegVarying, n: u64) -> Result<Reach<SrtPoint>> {
    check_orders(table, n)?;
    let s = table.tied_sum(n, a, &crate::observable::Observable::Const(1.0))?;
    Ok(srt_from(table.law(), a, n, s))
}

/// `(1/u(n)) Σ_k g(k/a(n)) P(φ_k = n)`, which tends to `E g(W_γ)`.
pub fn tied_down_functional(
    table: &ConvolutionTable,
    a: &RegVarying,
    n: u64,
    g: &dyn TestFunction,
) -> Result<Reach<f64>> {
    check_orders(table, n)?;
    if !table.law().reachable(n) {
        return Ok(Reach::Unreachable);
    }
    Ok(Reach::Reached(table.tied_sum(n, a, g)? / a.u_rate(n)))
}

/// `(1/a(N)) Σ_{n ≤ N} |A_n − u(n) 1_reach(n) E g(W_γ)|`.
pub fn cesaro_deviation(
    table: &ConvolutionTable,
    a: &RegVarying,
    big_n: u64,
    g: &dyn TestFunction,
    family: &StableFamily,
) -> Result<f64> {
    check_orders(table, big_n)?;
    let target = family.tied_down_expect(g)?;
    let tied: Vec<f64> = (1..=big_n).map(|n| table.tied_sum(n, a, g)).collect::<Result<_>>()?;
    cesaro_from(table.law(), a, &tied, target)
}

fn cesaro_from(law: &LatticeLaw, a: &RegVarying, tied: &[f64], target: f64) -> Result<f64> {
    let big_n = tied.len() as u64;
    if big_n == 0 {
        return Err(LabError::domain("N must be positive"));
    }
    let mut acc = Neumaier::new();
    for (i, &an) in tied.iter().enumerate() {
        let n = i as u64 + 1;
        let expect = if law.reachable(n) { a.u_rate(n) * target } else { 0.0 };
        acc.add((an - expect).abs());
    }
    Ok(acc.value() / a.eval(big_n as f64)?)
}

fn check_orders(table: &ConvolutionTable, n: u64) -> Result<()> {
    if n > table.m_max() {
        return Err(LabError::Range(format!("n = {n} exceeds the table bound {}", table.m_max())));
    }
    // orders above K only matter if they can reach n and were not negligible
    let needed = n / table.law().drift();
    if needed > table.k_max() && table.row(table.k_max()).is_some_and(|r| r.mass() > 0.0) {
        return Err(LabError::Range(format!(
            "orders up to {needed} can reach n = {n} but the table stops at {}",
            table.k_max()
        )));
    }
    Ok(())
}

impl TiedSums {
    /// SRT ratio from the precomputed sums of observable `which`
    /// (which must be the constant 1).
    pub fn srt_profile(&self, which: usize, n: u64) -> Result<Reach<SrtPoint>> {
        Ok(srt_from(self.law(), self.return_sequence(), n, self.get(which, n)?))
    }

    pub fn tied_down_functional(&self, which: usize, n: u64) -> Result<Reach<f64>> {
        if !self.law().reachable(n) {
            return Ok(Reach::Unreachable);
        }
        Ok(Reach::Reached(self.get(which, n)? / self.return_sequence().u_rate(n)))
    }

    /// Cesàro deviation against `target = E g(W_γ)`.
    pub fn cesaro_deviation(&self, which: usize, big_n: u64, target: f64) -> Result<f64> {
        if big_n > self.m_max() {
            return Err(LabError::Range(format!("N = {big_n} exceeds the sweep bound {}", self.m_max())));
        }
        let tied = &self.series(which)[1..=big_n as usize];
        cesaro_from(self.law(), self.return_sequence(), tied, target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LltPoint {
    pub k: u64,
    pub kappa: f64,
    /// `a⁻¹(n) P(φ_n = k)`
    pub lhs: f64,
    /// `p 1_{pℤ}(nξ − k) f_Z(k/a⁻¹(n))`
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LltProfile {
    pub points: Vec<LltPoint>,
    /// Largest `|lhs|` over every off-lattice coordinate in the window.
    pub off_lattice_max: f64,
    /// Largest `|lhs − rhs|` over the sampled on-lattice points.
    pub max_deviation: f64,
    /// Largest `p f_Z` over the sampled points.
    pub max_target: f64,
}

/// Compares `a⁻¹(n) P(φ_n = k)` with `p 1_{pℤ}(nξ − k) f_Z(k/a⁻¹(n))` for `k`
/// with `k/a⁻¹(n)` in `window`.
///
/// Every coordinate in the window is checked for the vanishing branch; the
/// density comparison is made at `samples` evenly spaced blocks of `p`
/// consecutive coordinates.
pub fn periodic_llt_profile(
    row: &RowView<'_>,
    a: &RegVarying,
    family: &StableFamily,
    window: (f64, f64),
    samples: usize,
) -> Result<LltProfile> {
    let law = row.law;
    let n = row.order;
    let scale = a.inverse(n as f64)?;
    let (lo, hi) = window;
    if !(lo > 0.0 && lo < hi) {
        return Err(LabError::domain(format!("window must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    let k_lo = (lo * scale).ceil() as u64;
    let k_hi = (hi * scale).floor() as u64;
    let covered = row.coordinate(row.probs.len().saturating_sub(1));
    if row.probs.is_empty() || k_hi > covered + law.period() {
        return Err(LabError::Range(format!(
            "window reaches k = {k_hi} but the row stops at {covered}"
        )));
    }
    let p = law.period();
    // off-lattice coordinates are not stored, so `prob` returns exact zeros
    // there; this scan guards the coordinate bookkeeping
    let mut off_lattice_max: f64 = 0.0;
    for k in k_lo..=k_hi {
        if (n * law.drift() + p * k - k) % p != 0 {
            off_lattice_max = off_lattice_max.max(row.prob(k) * scale);
        }
    }
    let samples = samples.max(1) as u64;
    let span = k_hi.saturating_sub(k_lo + p);
    let mut points = Vec::new();
    let mut max_deviation: f64 = 0.0;
    let mut max_target: f64 = 0.0;
    for s in 0..samples {
        let start = k_lo + if samples > 1 { span * s / (samples - 1) } else { 0 };
        for k in start..start + p {
            let kappa = k as f64 / scale;
            let lhs = scale * row.prob(k);
            let on_lattice = (n * law.drift()) % p == k % p;
            let rhs = if on_lattice { p as f64 * family.density(kappa)? } else { 0.0 };
            if on_lattice {
                max_deviation = max_deviation.max((lhs - rhs).abs());
                max_target = max_target.max(rhs);
            }
            points.push(LltPoint { k, kappa, lhs, rhs });
        }
    }
    Ok(LltProfile {
        points,
        off_lattice_max,
        max_deviation,
        max_target,
    })
}

/// `(E e^{2πi t φ/a⁻¹(n)})^n` and its stable limit `Φ_Z(2πt)`.
pub fn nagaev_check(law: &LatticeLaw, family: &StableFamily, t: f64, n: u64) -> Result<(Complex64, Complex64)> {
    if n == 0 {
        return Err(LabError::domain("n must be positive"));
    }
    let a = law.return_sequence();
    let theta = 2.0 * std::f64::consts::PI * t / a.inverse(n as f64)?;
    let li = UnitCirclePolylog::new(law.gamma());
    let lhs = law.char_fn_power(&li, theta, n);
    let rhs = family.char_fn(2.0 * std::f64::consts::PI * t);
    Ok((lhs, rhs))
}
