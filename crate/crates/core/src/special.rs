//! Special functions used across the crate.
//!
//! Γ and ln Γ come from `statrs` (Lanczos, ~1e-15 relative on the arguments
//! used here). ζ on the real line and the polylogarithm on the unit circle are
//! local because only the narrow parameter ranges below are needed.

use std::f64::consts::PI;

use num_complex::Complex64;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `1 / (Γ(1+γ) Γ(1-γ))`, the tail constant of an asymptotically γ-stable law.
pub fn tail_constant(gamma_index: f64) -> f64 {
    1.0 / (gamma(1.0 + gamma_index) * gamma(1.0 - gamma_index))
}

// B_2, B_4, ..., B_20
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Riemann ζ on the real line, `s != 1`.
///
/// Euler–Maclaurin for `s >= 0`, reflection for `s < 0`.
pub fn zeta(s: f64) -> f64 {
    assert!(s != 1.0, "zeta has a pole at 1");
    if s < 0.0 {
        let t = 1.0 - s;
        return 2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(t) * zeta(t);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s);
    }
    const N: usize = 24;
    let n = N as f64;
    let mut sum = 0.0;
    for k in (1..N).rev() {
        sum += (k as f64).powf(-s);
    }
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s(s+1)...(s+2j-2) / (2j)! times N^{-s-2j+1}
    let mut factor = s * n.powf(-s - 1.0) / 2.0;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let j = j + 1;
        if j > 1 {
            let m = (2 * j - 2) as f64;
            factor *= (s + m - 1.0) * (s + m) / ((m + 1.0) * (m + 2.0) * n * n);
        }
        sum += b * factor;
    }
    sum
}

/// `Li_s(e^{iω})` for `0 < s < 1`, evaluated by the expansion around `ω = 0`
/// which converges for `|ω| < 2π`; ω is first reduced to `(-π, π]`.
#[derive(Debug, Clone)]
pub struct UnitCirclePolylog {
    order: f64,
    gamma_factor: f64,
    coeffs: Vec<f64>,
}

impl UnitCirclePolylog {
    const TERMS: usize = 90;

    pub fn new(order: f64) -> Self {
        assert!(order > 0.0 && order < 1.0, "polylog order must lie in (0,1)");
        let mut coeffs = Vec::with_capacity(Self::TERMS);
        let mut ln_fact = 0.0;
        for k in 0..Self::TERMS {
            if k > 0 {
                ln_fact += (k as f64).ln();
            }
            coeffs.push(zeta(order - k as f64) / ln_fact.exp());
        }
        Self {
            order,
            gamma_factor: gamma(1.0 - order),
            coeffs,
        }
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// Value at `e^{iω}`, `ω != 0 mod 2π`.
    pub fn eval(&self, omega: f64) -> Complex64 {
        let w = reduce_angle(omega);
        assert!(w != 0.0, "Li_s diverges at z = 1");
        let mu = Complex64::new(0.0, w);
        let singular = {
            let modulus = w.abs().powf(self.order - 1.0);
            let phase = -w.signum() * PI / 2.0 * (self.order - 1.0);
            Complex64::from_polar(modulus, phase)
        };
        let mut acc = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(1.0, 0.0);
        for c in &self.coeffs {
            let term = pow * *c;
            acc += term;
            if term.norm() < 1e-18 * acc.norm() && pow.norm() < 1.0 {
                break;
            }
            pow *= mu;
        }
        singular * self.gamma_factor + acc
    }
}

/// Reduces an angle to `(-π, π]`.
pub fn reduce_angle(omega: f64) -> f64 {
    if omega > -PI && omega <= PI {
        return omega;
    }
    let two_pi = 2.0 * PI;
    let mut w = omega.rem_euclid(two_pi);
    if w > PI {
        w -= two_pi;
    }
    w
}

/// `ln(1 + d)` without cancellation for small `|d|`.
pub fn complex_ln_1p(d: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * d.re + d.norm_sqr()).ln_1p();
    let im = d.im.atan2(1.0 + d.re);
    Complex64::new(re, im)
}
