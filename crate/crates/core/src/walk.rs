//! Local time at zero of recurrent lattice walks on ℤ.
//!
//! The local time counts visits at times `1..=n`; time 0 is never counted.
//! Exact laws come from a dynamic program over (position, local time); the
//! Monte Carlo side samples bridges either exactly (Doob transform by the
//! remaining-time return probabilities) or by rejection.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::rng::{open01, par_chunks};
use crate::stable::StableFamily;
use crate::stats::ks_distance;

/// Largest horizon accepted by the exact dynamic program.
pub const MAX_EXACT_HORIZON: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WalkLaw {
    /// Steps `−1, 0, +1` with the given probabilities.
    ThreePoint { down: f64, stay: f64, up: f64 },
    /// Stays put with probability 1/2, otherwise jumps `±J` with
    /// `P(J ≥ j) = j^{−q}`; the local time then grows like `n^{1−1/q}`.
    SignedPower { q: f64 },
}

impl WalkLaw {
    /// The lazy simple walk: `{−1, 0, +1}` with `{1/4, 1/2, 1/4}`.
    pub fn lazy() -> Self {
        WalkLaw::ThreePoint {
            down: 0.25,
            stay: 0.5,
            up: 0.25,
        }
    }

    pub fn three_point(down: f64, stay: f64, up: f64) -> Result<Self> {
        if [down, stay, up].iter().any(|p| !(0.0..=1.0).contains(p)) || ((down + stay + up) - 1.0).abs() > 1e-12 {
            return Err(LabError::InvalidLaw(format!("step probabilities {down}, {stay}, {up} are not a pmf")));
        }
        if (down - up).abs() > 1e-15 {
            return Err(LabError::InvalidLaw(format!("step law must have mean 0, got {}", up - down)));
        }
        if stay == 0.0 {
            return Err(LabError::InvalidLaw("steps ±1 only: the walk has period 2".into()));
        }
        if up == 0.0 {
            return Err(LabError::InvalidLaw("the walk never moves".into()));
        }
        Ok(WalkLaw::ThreePoint { down, stay, up })
    }

    pub fn signed_power(q: f64) -> Result<Self> {
        if !(q > 1.0 && q < 2.0) {
            return Err(LabError::InvalidLaw(format!("tail index must lie in (1, 2), got {q}")));
        }
        Ok(WalkLaw::SignedPower { q })
    }

    /// Index of the local-time return sequence `a(n) ∝ n^γ`.
    pub fn gamma(&self) -> f64 {
        match *self {
            WalkLaw::ThreePoint { .. } => 0.5,
            WalkLaw::SignedPower { q } => 1.0 - 1.0 / q,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            WalkLaw::ThreePoint { down, up, .. } => down + up,
            WalkLaw::SignedPower { .. } => f64::INFINITY,
        }
    }

    fn three_point_probs(&self) -> Result<(f64, f64, f64)> {
        match *self {
            WalkLaw::ThreePoint { down, stay, up } => Ok((down, stay, up)),
            WalkLaw::SignedPower { .. } => Err(LabError::domain("exact dynamic programs need a three-point step law")),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match *self {
            WalkLaw::ThreePoint { down, stay, .. } => {
                let u = open01(rng);
                if u < down {
                    -1
                } else if u < down + stay {
                    0
                } else {
                    1
                }
            }
            WalkLaw::SignedPower { q } => {
                let u = open01(rng);
                if u < 0.5 {
                    return 0;
                }
                let j = open01(rng).powf(-1.0 / q).floor().min(1e15) as i64;
                if u < 0.75 {
                    -j
                } else {
                    j
                }
            }
        }
    }
}

fn check_horizon(n: u64) -> Result<()> {
    if n == 0 {
        return Err(LabError::domain("horizon must be positive"));
    }
    if n > MAX_EXACT_HORIZON {
        let entries = (n + 1) * (2 * n + 3);
        return Err(LabError::Resource {
            what: format!("exact local-time table for n = {n} needs {entries} states per time step"),
            suggestion: format!("n ≤ {MAX_EXACT_HORIZON}, or the Monte Carlo sampler"),
        });
    }
    Ok(())
}

/// Exact joint law of `(S_n, L_n)`.
#[derive(Debug, Clone)]
pub struct BridgeTable {
    n: u64,
    width: usize,
    /// Layer `l` holds `P(S_n = p, L_n = l)` at index `p + n + 1`.
    joint: Vec<f64>,
}

impl BridgeTable {
    pub fn build(law: &WalkLaw, n: u64) -> Result<Self> {
        check_horizon(n)?;
        let (down, stay, up) = law.three_point_probs()?;
        let nu = n as usize;
        let width = 2 * nu + 3;
        let zero = nu + 1;
        let mut cur = vec![0.0; (nu + 1) * width];
        let mut next = vec![0.0; (nu + 1) * width];
        cur[zero] = 1.0;
        for t in 0..nu {
            // after the step the layer l occupies |p| ≤ t + 1 − l
            for l in 0..=(t + 1) {
                let r = t + 1 - l;
                let (lo, hi) = (zero - r, zero + r);
                let dst = &mut next[l * width..(l + 1) * width];
                if l <= t {
                    let src = &cur[l * width..(l + 1) * width];
                    for p in lo..=hi {
                        dst[p] = up * src[p - 1] + stay * src[p] + down * src[p + 1];
                    }
                } else {
                    dst[lo..=hi].iter_mut().for_each(|x| *x = 0.0);
                }
                // arriving at 0 is a visit: the mass moves up one layer
                dst[zero] = if l == 0 {
                    0.0
                } else {
                    let src = &cur[(l - 1) * width..l * width];
                    up * src[zero - 1] + stay * src[zero] + down * src[zero + 1]
                };
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(BridgeTable { n, width, joint: cur })
    }

    pub fn horizon(&self) -> u64 {
        self.n
    }

    /// `P(S_n = position, L_n = local_time)`.
    pub fn prob(&self, position: i64, local_time: u64) -> f64 {
        let n = self.n as i64;
        if position.abs() > n || local_time > self.n {
            return 0.0;
        }
        self.joint[local_time as usize * self.width + (position + n + 1) as usize]
    }

    pub fn total_mass(&self) -> f64 {
        self.joint.iter().sum()
    }

    /// `P(S_n = 0)`.
    pub fn prob_at_zero(&self) -> f64 {
        (0..=self.n).map(|l| self.prob(0, l)).sum()
    }

    /// Law of `L_n` given `S_n = 0`, indexed by local time.
    pub fn conditional_pmf(&self) -> Vec<f64> {
        let z = self.prob_at_zero();
        (0..=self.n).map(|l| self.prob(0, l) / z).collect()
    }

    /// Unconditional law of `L_n`.
    pub fn local_time_pmf(&self) -> Vec<f64> {
        self.joint.chunks(self.width).map(|layer| layer.iter().sum()).collect()
    }

    /// `E(L_n)`.
    pub fn mean_local_time(&self) -> f64 {
        self.local_time_pmf().iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }

    /// `E((L_n/E L_n)^j | S_n = 0)`.
    pub fn conditional_moment(&self, j: u32) -> f64 {
        let a = self.mean_local_time();
        self.conditional_pmf()
            .iter()
            .enumerate()
            .map(|(l, p)| (l as f64 / a).powi(j as i32) * p)
            .sum()
    }
}

/// Exact law of the bridge local time: `P(L_n = l | S_n = 0)` for `l = 0..=n`.
pub fn bridge_local_time_exact(law: &WalkLaw, n: u64) -> Result<Vec<f64>> {
    Ok(BridgeTable::build(law, n)?.conditional_pmf())
}

/// `E((L_n/â(n))^j | S_n = 0)` with `â(n) = E(L_n)`, for `j ≤ 3`. The limit
/// is `E(W^j) = E(Y^{j+1})` for the Mittag-Leffler law `Y` of index 1/2.
pub fn bridge_local_time_moments(law: &WalkLaw, n: u64, j: u32) -> Result<f64> {
    if j > 3 {
        return Err(LabError::domain(format!("moment order must be at most 3, got {j}")));
    }
    if j == 0 {
        return Ok(1.0);
    }
    Ok(BridgeTable::build(law, n)?.conditional_moment(j))
}

/// `Σ_l |p_l − q_l| / 2`, padding the shorter vector with zeros.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BridgeSampler {
    /// Every path is a bridge: each step is drawn from the step law
    /// reweighted by the probability of returning to 0 in the remaining time.
    Exact,
    /// Free paths, kept when `S_n = 0`.
    Rejection,
}

#[derive(Debug, Clone, Serialize)]
pub struct BridgeMc {
    /// Empirical law of `L_n` over the bridges, indexed by local time.
    pub pmf: Vec<f64>,
    pub bridges: u64,
    pub trials: u64,
    pub acceptance_rate: f64,
}

impl BridgeMc {
    /// Five standard errors of the total variation estimate against `exact`:
    /// `5 · ½ Σ_l √(p_l(1 − p_l)/N)`.
    pub fn tv_bound(&self, exact: &[f64]) -> f64 {
        let n = self.bridges as f64;
        5.0 * 0.5 * exact.iter().map(|p| (p * (1.0 - p) / n).sqrt()).sum::<f64>()
    }
}

/// `h[m][x] = P(x + S_m = 0)` for `m ≤ n`, `|x| ≤ n + 1`.
struct ReturnKernel {
    n: usize,
    width: usize,
    h: Vec<f64>,
}

impl ReturnKernel {
    fn new(law: &WalkLaw, n: u64) -> Result<Self> {
        let (down, stay, up) = law.three_point_probs()?;
        let n = n as usize;
        let width = 2 * n + 5;
        let zero = n + 2;
        let mut h = vec![0.0; (n + 1) * width];
        h[zero] = 1.0;
        for m in 1..=n {
            let (prev, row) = h.split_at_mut(m * width);
            let prev = &prev[(m - 1) * width..];
            let row = &mut row[..width];
            for x in (zero - m)..=(zero + m) {
                row[x] = down * prev[x - 1] + stay * prev[x] + up * prev[x + 1];
            }
        }
        Ok(ReturnKernel { n, width, h })
    }

    fn get(&self, m: usize, x: i64) -> f64 {
        let idx = x + self.n as i64 + 2;
        if idx < 0 || idx as usize >= self.width {
            return 0.0;
        }
        self.h[m * self.width + idx as usize]
    }
}

/// Monte Carlo law of the bridge local time.
///
/// With [`BridgeSampler::Rejection`], an acceptance rate below
/// `trials^{−1/2}` is reported as an efficiency error.
pub fn bridge_local_time_mc(
    law: &WalkLaw,
    n: u64,
    trials: usize,
    seed: u64,
    sampler: BridgeSampler,
) -> Result<BridgeMc> {
    if trials < 10_000 {
        return Err(LabError::domain(format!("need at least 10^4 trials, got {trials}")));
    }
    check_horizon(n)?;
    let (down, stay, _) = law.three_point_probs()?;
    let nu = n as usize;
    let parts: Vec<(Vec<u64>, u64)> = match sampler {
        BridgeSampler::Rejection => par_chunks(seed, trials, |_, rng, len| {
            let mut counts = vec![0u64; nu + 1];
            let mut kept = 0;
            for _ in 0..len {
                let (mut s, mut l) = (0i64, 0usize);
                for _ in 0..nu {
                    s += law.draw(rng);
                    if s == 0 {
                        l += 1;
                    }
                }
                if s == 0 {
                    counts[l] += 1;
                    kept += 1;
                }
            }
            (counts, kept)
        }),
        BridgeSampler::Exact => {
            let kernel = ReturnKernel::new(law, n)?;
            par_chunks(seed, trials, |_, rng, len| {
                let mut counts = vec![0u64; nu + 1];
                for _ in 0..len {
                    let (mut s, mut l) = (0i64, 0usize);
                    for t in 0..nu {
                        let m = nu - t - 1;
                        let total = kernel.get(m + 1, s);
                        let w_down = down * kernel.get(m, s - 1);
                        let w_stay = stay * kernel.get(m, s);
                        let u = open01(rng) * total;
                        s += if u < w_down {
                            -1
                        } else if u < w_down + w_stay {
                            0
                        } else {
                            1
                        };
                        if s == 0 {
                            l += 1;
                        }
                    }
                    counts[l] += 1;
                }
                (counts, len as u64)
            })
        }
    };
    let mut counts = vec![0u64; nu + 1];
    let mut bridges = 0;
    for (c, k) in &parts {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
        bridges += k;
    }
    let acceptance_rate = bridges as f64 / trials as f64;
    if acceptance_rate < 1.0 / (trials as f64).sqrt() {
        return Err(LabError::Efficiency(format!(
            "{bridges} bridges from {trials} trials (rate {acceptance_rate:.2e}); increase trials"
        )));
    }
    Ok(BridgeMc {
        pmf: counts.iter().map(|&c| c as f64 / bridges as f64).collect(),
        bridges,
        trials: trials as u64,
        acceptance_rate,
    })
}

/// Unconditional local times `L_n` of independent walks, in trial order.
pub fn local_time_mc(law: &WalkLaw, n: u64, trials: usize, seed: u64) -> Result<Vec<u64>> {
    if trials == 0 || n == 0 {
        return Err(LabError::domain("trials and horizon must be positive"));
    }
    let lazy = *law == WalkLaw::lazy();
    Ok(par_chunks(seed, trials, |_, rng, len| {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let (mut s, mut l) = (0i64, 0u64);
            if lazy {
                // two fair bits per step: 00 → −1, 11 → +1, otherwise stay
                let mut left = 0;
                let mut bits = 0u64;
                for _ in 0..n {
                    if left == 0 {
                        bits = rng.next_u64();
                        left = 32;
                    }
                    let b = bits & 3;
                    bits >>= 2;
                    left -= 1;
                    s += (b == 3) as i64 - (b == 0) as i64;
                    l += (s == 0) as u64;
                }
            } else {
                for _ in 0..n {
                    s += law.draw(rng);
                    l += (s == 0) as u64;
                }
            }
            out.push(l);
        }
        out
    })
    .concat())
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkDarlingKac {
    /// Kolmogorov distance of `L_n/â` to the Mittag-Leffler law.
    pub ks_distance: f64,
    /// Mean of `L_n`.
    pub a_hat: f64,
}

/// Compares `L_n/â(n)` with the Mittag-Leffler law of the walk's index.
pub fn walk_darling_kac(law: &WalkLaw, n: u64, trials: usize, seed: u64) -> Result<WalkDarlingKac> {
    let family = StableFamily::new(law.gamma())?;
    let times = local_time_mc(law, n, trials, seed)?;
    let a_hat = times.iter().sum::<u64>() as f64 / trials as f64;
    if a_hat == 0.0 {
        return Err(LabError::domain("no visits to 0 in any trial"));
    }
    let scaled: Vec<f64> = times.iter().map(|&l| l as f64 / a_hat).collect();
    Ok(WalkDarlingKac {
        ks_distance: ks_distance(&scaled, |y| family.ml_cdf(y))?,
        a_hat,
    })
}

/// Golden-fixture text for the bridge local time at horizon `n`:
/// `local_time,probability` rows for every local time of positive mass,
/// probabilities with 17 significant digits.
pub fn bridge_fixture_csv(law: &WalkLaw, n: u64) -> Result<String> {
    let pmf = bridge_local_time_exact(law, n)?;
    let mut out = String::from("local_time,probability\n");
    for (l, p) in pmf.iter().enumerate() {
        if *p > 0.0 {
            out.push_str(&format!("{l},{p:.16e}\n"));
        }
    }
    Ok(out)
}

/// Parses text written by [`bridge_fixture_csv`] into a pmf indexed by
/// local time.
pub fn parse_bridge_fixture(text: &str) -> Result<Vec<f64>> {
    let mut pmf = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || LabError::domain(format!("fixture line {}: `{line}`", i + 1));
        let (l, p) = line.split_once(',').ok_or_else(bad)?;
        let l: usize = l.trim().parse().map_err(|_| bad())?;
        let p: f64 = p.trim().parse().map_err(|_| bad())?;
        if pmf.len() <= l {
            pmf.resize(l + 1, 0.0);
        }
        pmf[l] = p;
    }
    Ok(pmf)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// All `3^n` paths of the three-point walk.
    fn enumerate(law: &WalkLaw, n: u32) -> Vec<(i64, u64, f64)> {
        let (down, stay, up) = law.three_point_probs().unwrap();
        let mut out = Vec::new();
        for code in 0..3u64.pow(n) {
            let (mut c, mut s, mut l, mut p) = (code, 0i64, 0u64, 1.0);
            for _ in 0..n {
                let (step, q) = [(-1, down), (0, stay), (1, up)][(c % 3) as usize];
                c /= 3;
                s += step;
                p *= q;
                if s == 0 {
                    l += 1;
                }
            }
            out.push((s, l, p));
        }
        out
    }

    #[test]
    fn joint_law_matches_enumeration() {
        for law in [WalkLaw::lazy(), WalkLaw::three_point(0.1, 0.8, 0.1).unwrap()] {
            for n in 1..=7 {
                let table = BridgeTable::build(&law, n).unwrap();
                let mut oracle = std::collections::HashMap::new();
                for (s, l, p) in enumerate(&law, n as u32) {
                    *oracle.entry((s, l)).or_insert(0.0) += p;
                }
                for s in -(n as i64)..=(n as i64) {
                    for l in 0..=n {
                        let want = oracle.get(&(s, l)).copied().unwrap_or(0.0);
                        assert!((table.prob(s, l) - want).abs() < 1e-15, "n={n} s={s} l={l}");
                    }
                }
                assert!((table.total_mass() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_horizons() {
        let law = WalkLaw::lazy();
        assert_eq!(bridge_local_time_exact(&law, 1).unwrap(), vec![0.0, 1.0]);
        let p2 = bridge_local_time_exact(&law, 2).unwrap();
        assert!((p2[1] - 1.0 / 3.0).abs() < 1e-15 && (p2[2] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(bridge_local_time_moments(&law, 10, 0).unwrap(), 1.0);
        assert!(bridge_local_time_moments(&law, 10, 4).is_err());
        assert!(matches!(BridgeTable::build(&law, 2001), Err(LabError::Resource { .. })));
    }

    #[test]
    fn large_table_conserves_mass() {
        let t = BridgeTable::build(&WalkLaw::lazy(), 300).unwrap();
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
        // lazy walk: S_m is half a ±1 walk of 2m steps, so P(S_m = 0) = C(2m, m)/4^m
        let mut c = 1.0;
        for m in 1..=300 {
            c *= (2 * m - 1) as f64 / (2 * m) as f64;
        }
        assert!((t.prob_at_zero() - c).abs() < 1e-14);
    }

    #[test]
    fn law_validation() {
        assert!(WalkLaw::three_point(0.5, 0.0, 0.5).is_err());
        assert!(WalkLaw::three_point(0.2, 0.5, 0.3).is_err());
        assert!(WalkLaw::signed_power(2.5).is_err());
        assert_eq!(WalkLaw::signed_power(1.5).unwrap().gamma(), 1.0 - 1.0 / 1.5);
        assert!(BridgeTable::build(&WalkLaw::signed_power(1.5).unwrap(), 10).is_err());
    }

    #[test]
    fn samplers_agree_with_exact() {
        let law = WalkLaw::lazy();
        let exact = bridge_local_time_exact(&law, 30).unwrap();
        for sampler in [BridgeSampler::Exact, BridgeSampler::Rejection] {
            let mc = bridge_local_time_mc(&law, 30, 200_000, 2, sampler).unwrap();
            let tv = total_variation(&mc.pmf, &exact);
            assert!(tv < mc.tv_bound(&exact), "{sampler:?} tv {tv}");
        }
        let a = bridge_local_time_mc(&law, 30, 20_000, 5, BridgeSampler::Exact).unwrap();
        let b = bridge_local_time_mc(&law, 30, 20_000, 5, BridgeSampler::Exact).unwrap();
        assert_eq!(a.pmf, b.pmf);
    }

    #[test]
    fn fixture_round_trip() {
        let text = bridge_fixture_csv(&WalkLaw::lazy(), 4).unwrap();
        let parsed = parse_bridge_fixture(&text).unwrap();
        let exact = bridge_local_time_exact(&WalkLaw::lazy(), 4).unwrap();
        for (a, b) in parsed.iter().zip(&exact) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
