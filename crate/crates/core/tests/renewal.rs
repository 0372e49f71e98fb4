use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdlab::regvar::gcd;
use tdlab::renewal::{mc_hit_frequencies, nagaev_check, ConvolutionTable, LatticeLaw, Reach, TiedSums};
use tdlab::{Observable, StableFamily, TestFunction};

/// Plain O(K·M²) recursion `P(φ_k = m) = Σ_j P(φ_{k−1} = m − j) P(φ = j)`.
fn naive_table(law: &LatticeLaw, k_max: usize, m_max: usize) -> Vec<Vec<f64>> {
    let pmf: Vec<f64> = (0..=m_max).map(|m| law.pmf(m as u64)).collect();
    let mut rows = vec![vec![0.0; m_max + 1]];
    rows[0][0] = 1.0;
    for k in 1..=k_max {
        let prev = &rows[k - 1];
        let row: Vec<f64> = (0..=m_max).map(|m| (0..=m).map(|j| prev[m - j] * pmf[j]).sum()).collect();
        rows.push(row);
    }
    rows
}

#[test]
fn table_matches_naive_recursion() {
    for (gamma, p, xi) in [(0.5, 1, 1), (0.7, 3, 2), (0.3, 4, 1)] {
        let law = LatticeLaw::new(gamma, p, xi).unwrap();
        let t = ConvolutionTable::build(&law, 30, 120).unwrap();
        let naive = naive_table(&law, 30, 120);
        for k in 1..=30u64 {
            for m in 0..=120u64 {
                let (a, b) = (t.prob(k, m), naive[k as usize][m as usize]);
                assert!((a - b).abs() <= 1e-15 + 1e-12 * b, "γ={gamma} p={p} k={k} m={m}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_table_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for gamma in [0.5, 0.7] {
        let law = LatticeLaw::new(gamma, 1, 1).unwrap();
        let table = ConvolutionTable::build(&law, 100, 100).unwrap();
        let pairs: Vec<(u64, u64)> = (0..20)
            .map(|_| {
                let n = rng.random_range(2..=100u64);
                let k = rng.random_range(1..=n.min(12));
                (k, n)
            })
            .collect();
        let trials = 1_000_000;
        let mc = mc_hit_frequencies(&law, &pairs, trials, 77).unwrap();
        for (&(k, n), est) in pairs.iter().zip(&mc) {
            let p = table.prob(k, n);
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (est.mean - p).abs() <= 4.0 * se + 1e-12,
                "γ={gamma} (k={k}, n={n}): MC {} vs DP {p} (se {se:e})",
                est.mean
            );
        }
    }
}

fn tied_moment(j: u32) -> (f64, f64) {
    let law = LatticeLaw::new(0.7, 1, 1).unwrap();
    let a = law.return_sequence();
    let g = Observable::Power(j);
    let sums = TiedSums::compute(&law, &a, &[&g as &dyn TestFunction], 10_000).unwrap();
    let value = sums.tied_down_functional(0, 10_000).unwrap().reached().unwrap();
    (value, StableFamily::new(0.7).unwrap().ml_moment(j + 1))
}

#[test]
fn tied_down_moment_chain_order_zero() {
    let (v, target) = tied_moment(0);
    assert!((v / target - 1.0).abs() <= 0.10, "{v} vs {target}");
}

#[test]
#[ignore = "fails at n = 10^4: the canonical law's n^(γ-1) correction leaves the first moment 11.4% high"]
fn tied_down_moment_chain_order_one() {
    let (v, target) = tied_moment(1);
    assert!((v / target - 1.0).abs() <= 0.10, "{v} vs {target}");
}

#[test]
#[ignore = "fails at n = 10^4: the canonical law's n^(γ-1) correction leaves the second moment 21% high"]
fn tied_down_moment_chain_order_two() {
    let (v, target) = tied_moment(2);
    assert!((v / target - 1.0).abs() <= 0.15, "{v} vs {target}");
}

#[test]
fn tied_down_identity_extrapolates_to_size_biased_mean() {
    // remove the leading c·n^{γ−1} correction using n and n/2
    let law = LatticeLaw::new(0.7, 1, 1).unwrap();
    let a = law.return_sequence();
    let sums = TiedSums::compute(&law, &a, &[&Observable::Identity as &dyn TestFunction], 10_000).unwrap();
    let f = |n: u64| sums.tied_down_functional(0, n).unwrap().reached().unwrap();
    let (n1, n2) = (5000.0f64, 10_000.0f64);
    let (w1, w2) = (n1.powf(0.3), n2.powf(0.3));
    let extrapolated = (f(10_000) * w2 - f(5000) * w1) / (w2 - w1);
    let target = StableFamily::new(0.7).unwrap().ml_moment(2);
    assert!((extrapolated / target - 1.0).abs() <= 0.02, "{extrapolated} vs {target}");
    // and the raw values approach the target from above
    assert!(f(1000) > f(5000) && f(5000) > f(10_000) && f(10_000) > target);
}

#[test]
fn unreachable_horizon_has_no_mass() {
    let law = LatticeLaw::new(0.5, 3, 2).unwrap();
    let a = law.return_sequence();
    let sums = TiedSums::compute(&law, &a, &[&Observable::Const(1.0) as &dyn TestFunction], 50).unwrap();
    assert!(matches!(sums.srt_profile(0, 1).unwrap(), Reach::Unreachable));
    assert_eq!(sums.get(0, 1).unwrap(), 0.0);
}

#[test]
fn nagaev_modulus_decays_like_the_stable_limit() {
    let law = LatticeLaw::new(0.5, 1, 1).unwrap();
    let family = StableFamily::new(0.5).unwrap();
    let mut previous = f64::INFINITY;
    for i in 0..=40 {
        let t = i as f64 * 0.05;
        let (lhs, rhs) = nagaev_check(&law, &family, t, 100_000).unwrap();
        assert!(lhs.norm() <= previous + 1e-12, "t={t}");
        previous = lhs.norm();
        // |E e^{itZ}| = exp(−|t|^γ cos(γπ/2)/Γ(1+γ))
        let shape = (-(2.0 * std::f64::consts::PI * t).sqrt() * (std::f64::consts::FRAC_PI_4).cos()
            / tdlab::special::gamma(1.5))
        .exp();
        assert!((rhs.norm() - shape).abs() < 1e-12, "t={t}");
        assert!((lhs.norm() / shape - 1.0).abs() <= 0.05, "t={t}: {} vs {shape}", lhs.norm());
    }
}

fn coprime_law() -> impl Strategy<Value = (f64, u64, u64)> {
    (0.1..0.95f64, 1u64..6).prop_flat_map(|(g, p)| {
        let xis: Vec<u64> = (1..=p).filter(|&x| gcd(x, p) == 1).collect();
        (Just(g), Just(p), prop::sample::select(xis))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rows_conserve_mass_and_respect_the_lattice((gamma, p, xi) in coprime_law(), k_max in 1u64..40, m_max in 1u64..300) {
        let law = LatticeLaw::new(gamma, p, xi).unwrap();
        let t = ConvolutionTable::build(&law, k_max, m_max).unwrap();
        prop_assert!(t.conservation_error() <= 1e-12);
        for k in 0..=t.k_max() {
            let mass: f64 = (0..=m_max).map(|m| t.prob(k, m)).sum();
            prop_assert!((mass + t.overflow(k) - 1.0).abs() <= 1e-12);
            for m in 0..=m_max {
                if (m + p * k - (k * xi) % p) % p != 0 {
                    prop_assert_eq!(t.prob(k, m), 0.0);
                }
            }
        }
    }

    #[test]
    fn pmf_is_a_probability_law((gamma, p, xi) in coprime_law()) {
        let law = LatticeLaw::new(gamma, p, xi).unwrap();
        let head: f64 = (0..2000).map(|j| law.pmf_index(j)).sum();
        prop_assert!((head + law.tail_index(1999) - 1.0).abs() < 1e-12);
        prop_assert!((0..200).all(|j| law.pmf_index(j) > 0.0));
    }
}
