//! Monte Carlo renewal paths.

use super::law::{ContinuousLaw, LatticeLaw};
use crate::error::{LabError, Result};
use crate::observable::TestFunction;
use crate::regvar::{Interval, RegVarying};
use crate::rng::par_chunks;
use crate::stable::McEstimate;
use crate::sum::Moments;

/// Frequencies of `{φ_k = m}` for each requested `(k, m)`, all estimated from
/// the same simulated paths.
pub fn mc_hit_frequencies(law: &LatticeLaw, pairs: &[(u64, u64)], trials: usize, seed: u64) -> Result<Vec<McEstimate>> {
    if trials == 0 {
        return Err(LabError::domain("trials must be positive"));
    }
    let k_max = pairs.iter().map(|p| p.0).max().unwrap_or(0) as usize;
    let counts: Vec<Vec<u64>> = par_chunks(seed, trials, |_, rng, len| {
        let mut hits = vec![0u64; pairs.len()];
        let mut path = vec![0u64; k_max + 1];
        for _ in 0..len {
            for k in 1..=k_max {
                path[k] = path[k - 1].saturating_add(law.draw(rng));
            }
            for (h, &(k, m)) in hits.iter_mut().zip(pairs) {
                if path[k as usize] == m {
                    *h += 1;
                }
            }
        }
        hits
    });
    let n = trials as f64;
    Ok((0..pairs.len())
        .map(|i| {
            let c: u64 = counts.iter().map(|v| v[i]).sum();
            let p = c as f64 / n;
            McEstimate {
                mean: p,
                std_error: (p * (1.0 - p) / n).sqrt(),
                count: trials as u64,
            }
        })
        .collect())
}

/// Estimates `(1/u(n)) Σ_k g(k/a(n)) P(φ_k ∈ n + I)`; with `normalize` the
/// result is further divided by `|I|`.
///
/// Each path runs until its partial sum exceeds `n + sup I`; every `k` whose
/// partial sum lands in `n + I` is counted.
#[allow(clippy::too_many_arguments)]
pub fn mc_tied_down_continuous(
    law: &ContinuousLaw,
    a: &RegVarying,
    n: f64,
    window: Interval,
    g: &dyn TestFunction,
    trials: usize,
    seed: u64,
    normalize: bool,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(LabError::domain("trials must be positive"));
    }
    if !(n > 0.0) {
        return Err(LabError::domain("n must be positive"));
    }
    if !(window.length() > 0.0) {
        return Err(LabError::domain("window must have positive length"));
    }
    let an = a.eval(n)?;
    let lo = n + window.lo;
    let hi = n + window.hi;
    let parts: Vec<Moments> = par_chunks(seed, trials, |_, rng, len| {
        let mut m = Moments::default();
        for _ in 0..len {
            let mut s = 0.0;
            let mut k = 0u64;
            let mut total = 0.0;
            while s < hi {
                s += law.draw(rng);
                k += 1;
                if s >= lo && s < hi {
                    total += g.eval(k as f64 / an);
                }
            }
            m.push(total);
        }
        m
    });
    let mut all = Moments::default();
    for p in &parts {
        all.merge(p);
    }
    let mut scale = 1.0 / a.u_rate_real(n);
    if normalize {
        scale /= window.length();
    }
    Ok(McEstimate {
        mean: all.mean * scale,
        std_error: all.std_error() * scale,
        count: all.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observable::Observable;

    #[test]
    fn zero_observable_and_empty_window() {
        let law = ContinuousLaw::pareto(0.6, 1.0).unwrap();
        let a = law.return_sequence();
        let w = Interval::new(0.0, 0.5).unwrap();
        let e = mc_tied_down_continuous(&law, &a, 100.0, w, &Observable::Const(0.0), 2000, 1, false).unwrap();
        assert_eq!(e.mean, 0.0);
        let tiny = Interval::new(0.0, 1e-12).unwrap();
        let e = mc_tied_down_continuous(&law, &a, 100.0, tiny, &Observable::Const(1.0), 2000, 1, false).unwrap();
        assert_eq!(e.mean, 0.0);
        assert!(mc_tied_down_continuous(&law, &a, 100.0, w, &Observable::Const(1.0), 0, 1, false).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let law = ContinuousLaw::pareto(0.6, 1.0).unwrap();
        let a = law.return_sequence();
        let w = Interval::new(0.0, 0.5).unwrap();
        let run = || mc_tied_down_continuous(&law, &a, 500.0, w, &Observable::Const(1.0), 40_000, 9, false).unwrap();
        assert_eq!(run(), run());
    }

    #[test]
    fn first_order_hits_match_pmf() {
        let law = LatticeLaw::new(0.5, 1, 1).unwrap();
        let est = mc_hit_frequencies(&law, &[(1, 1), (1, 2), (2, 2)], 200_000, 3).unwrap();
        let exact = [law.pmf(1), law.pmf(2), law.pmf(1).powi(2)];
        for (e, x) in est.iter().zip(exact) {
            assert!((e.mean - x).abs() < 4.0 * e.std_error, "{e:?} vs {x}");
        }
    }
}
