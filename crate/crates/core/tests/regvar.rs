use proptest::prelude::*;
use tdlab::regvar::{lemma22_limit, lemma22_sum, Interval, LatticeWindow};
use tdlab::{Observable, RegVarying, StableFamily};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_identity_on_compact_windows(n in 100_000u64..100_000_000, pick in 0.0..1.0f64) {
        let a = RegVarying::new(0.5, 1.0).unwrap();
        let ks = a.window_indices(n, 0.5, 5.0);
        let (lo, hi) = (*ks.start(), *ks.end());
        prop_assume!(lo <= hi);
        let k = lo + ((hi - lo) as f64 * pick) as u64;
        let x = a.grid(k, n).x;
        prop_assert!((0.5..=5.0).contains(&x));
        let r = a.grid_identity_ratio(k, n);
        prop_assert!((0.99..=1.01).contains(&r), "k={} n={} ratio {}", k, n, r);
    }

    #[test]
    fn inverse_undoes_eval(gamma in 0.05..0.99f64, scale in 0.1..10.0f64, t in 1.0..1e9f64) {
        let a = RegVarying::new(gamma, scale).unwrap();
        let back = a.inverse(a.eval(t).unwrap()).unwrap();
        prop_assert!((back / t - 1.0).abs() < 1e-11);
    }

    #[test]
    fn rate_is_gamma_a_over_n(gamma in 0.05..0.99f64, scale in 0.1..10.0f64, n in 1u64..1_000_000_000) {
        let a = RegVarying::new(gamma, scale).unwrap();
        let expect = gamma * a.eval(n as f64).unwrap() / n as f64;
        prop_assert!((a.u_rate(n) / expect - 1.0).abs() < 1e-13);
    }

    #[test]
    fn window_indices_are_exactly_the_window(gamma in 0.2..0.9f64, n in 10u64..100_000, c in 0.05..1.0f64, w in 0.5..20.0f64) {
        let a = RegVarying::new(gamma, 1.0).unwrap();
        let d = c + w;
        let ks = a.window_indices(n, c, d);
        for k in ks.clone() {
            let x = a.grid(k, n).x;
            prop_assert!(x >= c && x <= d);
        }
        if *ks.start() > 1 && ks.start() <= ks.end() {
            prop_assert!(a.grid(ks.start() - 1, n).x > d);
        }
        if *ks.end() < n && ks.start() <= ks.end() {
            prop_assert!(a.grid(ks.end() + 1, n).x < c);
        }
    }
}

#[test]
fn periodic_and_aperiodic_sums_agree() {
    for gamma in [0.5, 0.7] {
        let f = StableFamily::new(gamma).unwrap();
        let a = RegVarying::new(gamma, 1.0).unwrap();
        let g = Observable::Const(1.0);
        let n = 1_000_000;
        let flat = lemma22_sum(&a, &f, &LatticeWindow::aperiodic(0.05, 40.0), &g, n).unwrap().value().unwrap();
        let periodic = LatticeWindow {
            p: 2,
            xi: 1,
            residues: Interval::new(0.0, 1.0).unwrap(),
            c: 0.05,
            d: 40.0,
        };
        let lim = lemma22_limit(&f, &g, 0.05, 40.0, 1.0).unwrap();
        for m in [n, n + 1] {
            let s = lemma22_sum(&a, &f, &periodic, &g, m).unwrap().value().unwrap();
            assert!((s / flat - 1.0).abs() <= 0.03, "γ={gamma} n={m}: {s} vs {flat}");
            assert!((s / lim - 1.0).abs() <= 0.03);
        }
    }
}
