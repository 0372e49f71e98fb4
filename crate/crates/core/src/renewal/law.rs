use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::regvar::{gcd, RegVarying};
use crate::rng::open01;
use crate::special::{complex_ln_1p, tail_constant, UnitCirclePolylog};

/// Increment law on `{ξ + p j : j ≥ 0}` with
/// `P(φ = ξ + p j) = (j+1)^{-γ} − (j+2)^{-γ}`, so `P(φ > ξ + p j) = (j+2)^{-γ}`.
///
/// The tail is `P(φ > t) ∼ (t/p)^{-γ} = C_γ / a(t)` with `a(t) = C_γ p^{-γ} t^γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeLaw {
    gamma: f64,
    p: u64,
    xi: u64,
    tail_scale: f64,
}

impl LatticeLaw {
    pub fn new(gamma: f64, p: u64, xi: u64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::InvalidLaw(format!("index must lie in (0,1), got {gamma}")));
        }
        if p == 0 || xi == 0 || xi > p {
            return Err(LabError::InvalidLaw(format!("need 0 < ξ ≤ p, got ξ={xi}, p={p}")));
        }
        if gcd(xi, p) != 1 {
            return Err(LabError::InvalidLaw(format!(
                "drift {xi} and period {p} are not coprime; the walk lives on a proper sublattice"
            )));
        }
        let tail_scale = tail_constant(gamma) * (p as f64).powf(-gamma);
        Ok(Self {
            gamma,
            p,
            xi,
            tail_scale,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn period(&self) -> u64 {
        self.p
    }

    pub fn drift(&self) -> u64 {
        self.xi
    }

    /// `c` in `a(t) = c t^γ`.
    pub fn tail_scale(&self) -> f64 {
        self.tail_scale
    }

    pub fn return_sequence(&self) -> RegVarying {
        RegVarying::new(self.gamma, self.tail_scale).expect("validated at construction")
    }

    /// `P(φ = ξ + p j)`
    pub fn pmf_index(&self, j: u64) -> f64 {
        let j1 = j as f64 + 1.0;
        // (j+1)^{-γ} (1 − (1 + 1/(j+1))^{-γ}) without cancellation
        j1.powf(-self.gamma) * -(-self.gamma * (1.0 / j1).ln_1p()).exp_m1()
    }

    /// `P(φ > ξ + p j) = (j+2)^{-γ}`
    pub fn tail_index(&self, j: u64) -> f64 {
        (j as f64 + 2.0).powf(-self.gamma)
    }

    /// Lattice index of `m` if `m` is in the support.
    pub fn index_of(&self, m: u64) -> Option<u64> {
        (m >= self.xi && (m - self.xi) % self.p == 0).then(|| (m - self.xi) / self.p)
    }

    pub fn pmf(&self, m: u64) -> f64 {
        self.index_of(m).map_or(0.0, |j| self.pmf_index(j))
    }

    /// `P(φ > t)`
    pub fn survival(&self, t: f64) -> f64 {
        if t < self.xi as f64 {
            return 1.0;
        }
        let j = ((t - self.xi as f64) / self.p as f64).floor() as u64;
        self.tail_index(j)
    }

    /// First `len` lattice probabilities `P(φ = ξ + p j)`, `j < len`.
    pub fn pmf_vec(&self, len: usize) -> Vec<f64> {
        (0..len as u64).map(|j| self.pmf_index(j)).collect()
    }

    /// Whether some `φ_k`, `k ≥ 1`, can equal `n`: `kξ ≡ n (mod p)` with `kξ ≤ n`.
    pub fn reachable(&self, n: u64) -> bool {
        self.first_order(n).is_some_and(|k| k * self.xi <= n)
    }

    /// Smallest `k ≥ 1` with `kξ ≡ n (mod p)`.
    pub fn first_order(&self, n: u64) -> Option<u64> {
        (1..=self.p).find(|k| (k * self.xi) % self.p == n % self.p)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // P(J ≥ j) = (j+1)^{-γ} for J = ⌊U^{-1/γ}⌋ − 1
        let u = open01(rng);
        let j = (u.powf(-1.0 / self.gamma).floor() - 1.0).min(9.0e18) as u64;
        self.xi + self.p * j
    }

    /// Characteristic function `E e^{iθφ}` from the closed form in terms of
    /// `Li_γ` on the unit circle.
    pub fn char_fn(&self, theta: f64) -> Complex64 {
        let li = UnitCirclePolylog::new(self.gamma);
        Complex64::new(1.0, 0.0) + self.char_fn_minus_one(&li, theta)
    }

    /// `E e^{iθφ} − 1`, accurate when the result is small.
    pub fn char_fn_minus_one(&self, li: &UnitCirclePolylog, theta: f64) -> Complex64 {
        let w = crate::special::reduce_angle(self.p as f64 * theta);
        let drift = Complex64::from_polar(1.0, self.xi as f64 * theta);
        if w == 0.0 {
            return drift - 1.0;
        }
        // ψ(ω) = Σ_j pmf_j e^{iωj} = 1 − (1−z) z^{-2} (Li_γ(z) − z), z = e^{iω}
        let z = Complex64::from_polar(1.0, w);
        let one_minus_z = Complex64::new(2.0 * (w / 2.0).sin().powi(2), -w.sin());
        let lattice_minus_one = -(one_minus_z * (li.eval(w) - z)) / (z * z);
        // e^{iθξ}ψ − 1 = (e^{iθξ} − 1)(ψ − 1) + (e^{iθξ} − 1) + (ψ − 1)
        let drift_minus_one = {
            let a = self.xi as f64 * theta;
            Complex64::new(-2.0 * (a / 2.0).sin().powi(2), a.sin())
        };
        drift_minus_one * lattice_minus_one + drift_minus_one + lattice_minus_one
    }

    /// `(E e^{iθφ})^n` through `exp(n ln(1 + (ψ − 1)))`.
    pub fn char_fn_power(&self, li: &UnitCirclePolylog, theta: f64, n: u64) -> Complex64 {
        let d = self.char_fn_minus_one(li, theta);
        (complex_ln_1p(d) * n as f64).exp()
    }
}

/// Continuous-time increment laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContinuousLaw {
    /// `P(φ > t) = min(1, (t/t0)^{-γ})`
    Pareto { gamma: f64, t0: f64 },
    /// `φ = ξ + J` with `J` the canonical lattice increment index; values in `ξ + ℤ`.
    DriftedLattice { gamma: f64, xi: f64 },
}

impl ContinuousLaw {
    pub fn pareto(gamma: f64, t0: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::InvalidLaw(format!("index must lie in (0,1), got {gamma}")));
        }
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(LabError::InvalidLaw(format!("scale must be positive, got {t0}")));
        }
        Ok(ContinuousLaw::Pareto { gamma, t0 })
    }

    pub fn drifted_lattice(gamma: f64, xi: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(LabError::InvalidLaw(format!("index must lie in (0,1), got {gamma}")));
        }
        if !(xi > 0.0) || xi.fract() == 0.0 {
            return Err(LabError::InvalidLaw(format!("drift must be positive and non-integer, got {xi}")));
        }
        Ok(ContinuousLaw::DriftedLattice { gamma, xi })
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            ContinuousLaw::Pareto { gamma, .. } | ContinuousLaw::DriftedLattice { gamma, .. } => gamma,
        }
    }

    /// `P(φ > t)`
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            ContinuousLaw::Pareto { gamma, t0 } => {
                if t <= t0 {
                    1.0
                } else {
                    (t / t0).powf(-gamma)
                }
            }
            ContinuousLaw::DriftedLattice { gamma, xi } => {
                if t < xi {
                    1.0
                } else {
                    ((t - xi).floor() + 2.0).powf(-gamma)
                }
            }
        }
    }

    /// `t0 2^{1/γ}` for the Pareto law.
    pub fn median(&self) -> f64 {
        match *self {
            ContinuousLaw::Pareto { gamma, t0 } => t0 * 2f64.powf(1.0 / gamma),
            ContinuousLaw::DriftedLattice { gamma, xi } => {
                // smallest j with P(J ≤ j) ≥ 1/2
                xi + (2f64.powf(1.0 / gamma) - 1.0).ceil() - 1.0
            }
        }
    }

    /// `c` with `P(φ > t) ∼ C_γ / (c t^γ)`.
    pub fn tail_scale(&self) -> f64 {
        match *self {
            ContinuousLaw::Pareto { gamma, t0 } => tail_constant(gamma) * t0.powf(-gamma),
            ContinuousLaw::DriftedLattice { gamma, .. } => tail_constant(gamma),
        }
    }

    pub fn return_sequence(&self) -> RegVarying {
        RegVarying::new(self.gamma(), self.tail_scale()).expect("validated at construction")
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open01(rng);
        match *self {
            ContinuousLaw::Pareto { gamma, t0 } => t0 * u.powf(-1.0 / gamma),
            ContinuousLaw::DriftedLattice { gamma, xi } => xi + u.powf(-1.0 / gamma).floor() - 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sum::compensated_sum;

    #[test]
    fn canonical_pmf_values() {
        let law = LatticeLaw::new(0.5, 1, 1).unwrap();
        assert!((law.pmf(1) - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
        assert!((law.pmf(1) - 0.292_893_218_813_452_5).abs() < 1e-15);
        assert_eq!(law.pmf(0), 0.0);
        for t in [1e2, 1e4, 1e6] {
            assert!((law.survival(t) * t.sqrt() - 1.0).abs() < 2.0 / t.sqrt() + 1e-12);
        }
    }

    #[test]
    fn pmf_telescopes_to_one() {
        for &(g, p, xi) in &[(0.5, 1, 1), (0.3, 3, 2), (0.9, 4, 3)] {
            let law = LatticeLaw::new(g, p, xi).unwrap();
            let j = 100_000u64;
            let head = compensated_sum((0..j).map(|i| law.pmf_index(i)));
            assert!((head + law.tail_index(j - 1) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn support_respects_period() {
        let law = LatticeLaw::new(0.5, 3, 1).unwrap();
        for m in 0..40 {
            assert_eq!(law.pmf(m) > 0.0, m % 3 == 1, "m={m}");
        }
        assert!(LatticeLaw::new(0.5, 4, 2).is_err());
        assert!(LatticeLaw::new(0.5, 3, 0).is_err());
        assert!(LatticeLaw::new(1.0, 1, 1).is_err());
    }

    #[test]
    fn tail_calibration() {
        for &(g, p) in &[(0.5, 1u64), (0.7, 3)] {
            let law = LatticeLaw::new(g, p, 1).unwrap();
            let a = law.return_sequence();
            let t = 1e6;
            let c = tail_constant(g);
            let ratio = law.survival(t) * a.eval(t).unwrap() / c;
            assert!((ratio - 1.0).abs() < 0.01, "γ={g} p={p}: {ratio}");
        }
    }

    #[test]
    fn reachability() {
        let law = LatticeLaw::new(0.5, 3, 2).unwrap();
        // φ_k ≡ 2k (mod 3) and φ_k ≥ 2k
        assert!(!law.reachable(1));
        assert!(law.reachable(2));
        assert!(law.reachable(4));
        assert!(law.reachable(7));
        let law = LatticeLaw::new(0.5, 3, 1).unwrap();
        assert!((1..100).all(|n| law.reachable(n)));
        assert!(!law.reachable(0));
    }

    #[test]
    fn char_fn_matches_direct_sum() {
        // truncated direct sum plus the remaining tail mass at the end of the
        // support is an independent oracle at moderate θ
        let law = LatticeLaw::new(0.5, 3, 2).unwrap();
        for &theta in &[0.3, 1.0, 2.5, -0.7] {
            let exact = law.char_fn(theta);
            let jmax = 4_000_000u64;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..jmax {
                acc += Complex64::from_polar(law.pmf_index(j), theta * (law.drift() + law.period() * j) as f64);
            }
            // remainder Σ_{j≥J} pmf_j e^{iωj}: summation by parts bounds it by 2 pmf_J/|1 − e^{iω}|
            let w = crate::special::reduce_angle(3.0 * theta).abs();
            let bound = 2.0 * law.pmf_index(jmax) / (2.0 * (w / 2.0).sin()) + 1e-12;
            assert!((exact - acc).norm() <= bound, "θ={theta}: {exact} vs {acc}");
        }
        assert_eq!(law.char_fn(0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn continuous_law_basics() {
        let law = ContinuousLaw::pareto(0.6, 2.0).unwrap();
        assert_eq!(law.survival(2.0), 1.0);
        assert!((law.survival(4.0) - 2f64.powf(-0.6)).abs() < 1e-15);
        assert!((law.median() - 2.0 * 2f64.powf(1.0 / 0.6)).abs() < 1e-12);
        assert!((law.survival(law.median()) - 0.5).abs() < 1e-15);
        assert!(ContinuousLaw::drifted_lattice(0.5, 2.0).is_err());
        let shifted = ContinuousLaw::drifted_lattice(0.5, 2f64.sqrt()).unwrap();
        let mut rng = crate::rng::stream_rng(1, 0);
        for _ in 0..1000 {
            let x = shifted.draw(&mut rng);
            let j = x - 2f64.sqrt();
            assert!((j - j.round()).abs() < 1e-9 && j > -0.5);
        }
    }
}
