use proptest::prelude::*;
use tdlab::quad::{integrate, QuadConfig};
use tdlab::stable::weighted_mean;
use tdlab::{Observable, StableFamily};

#[test]
fn densities_integrate_to_one() {
    let cfg = QuadConfig::with_tolerances(1e-12, 1e-10);
    for gamma in [0.3, 0.5, 0.7] {
        let f = StableFamily::new(gamma).unwrap();
        // x = e^u spreads the heavy tail x^{-1-γ} over a long but finite range
        let z = |u: f64| {
            let x = u.exp();
            f.density(x).unwrap() * x
        };
        let z_mass = integrate(z, -30.0, 0.0, &cfg).unwrap().value
            + integrate(z, 0.0, 10.0, &cfg).unwrap().value
            + integrate(z, 10.0, 300.0, &cfg).unwrap().value;
        assert!((z_mass - 1.0).abs() <= 1e-6, "γ={gamma}: ∫f_Z = {z_mass}");
        let y = |t: f64| f.ml_density(t).unwrap();
        let y_mass = integrate(y, 0.0, 1.0, &cfg).unwrap().value + integrate(y, 1.0, 60.0, &cfg).unwrap().value;
        assert!((y_mass - 1.0).abs() <= 1e-6, "γ={gamma}: ∫f_Y = {y_mass}");
    }
}

#[test]
fn size_bias_identity_by_sampling() {
    for gamma in [0.3, 0.5, 0.7] {
        let f = StableFamily::new(gamma).unwrap();
        let samples = f.sample_tied_down(31, 1_000_000).unwrap();
        for g in [Observable::ExpDecay, Observable::Clamp(3.0)] {
            let exact = f.tied_down_expect(&g).unwrap();
            let est = weighted_mean(&samples, &g);
            assert!(
                (est.mean - exact).abs() <= 4.0 * est.std_error,
                "γ={gamma} g={g}: {} ± {} vs {exact}",
                est.mean,
                est.std_error
            );
        }
    }
}

#[test]
fn size_bias_of_moments() {
    // E(W^j) = E(Y^{j+1})
    for gamma in [0.3, 0.5, 0.7] {
        let f = StableFamily::new(gamma).unwrap();
        for j in 0..3 {
            let w = f.tied_down_expect(&Observable::Power(j)).unwrap();
            let y = f.ml_moment(j + 1);
            assert!((w / y - 1.0).abs() < 1e-8, "γ={gamma} j={j}: {w} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_and_survival_split_unity(gamma in 0.1..0.95f64, x in 0.01..100.0f64) {
        let f = StableFamily::new(gamma).unwrap();
        let (c, s) = (f.cdf(x).unwrap(), f.survival(x).unwrap());
        prop_assert!((0.0..=1.0).contains(&c) && (0.0..=1.0).contains(&s));
        prop_assert!((c + s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cdf_is_monotone(gamma in 0.1..0.95f64, x in 0.01..50.0f64, dx in 0.0..5.0f64) {
        let f = StableFamily::new(gamma).unwrap();
        prop_assert!(f.cdf(x).unwrap() <= f.cdf(x + dx).unwrap() + 1e-13);
        prop_assert!(f.ml_cdf(x).unwrap() <= f.ml_cdf(x + dx).unwrap() + 1e-13);
    }

    #[test]
    fn densities_are_positive(gamma in 0.1..0.95f64, x in 0.05..30.0f64) {
        let f = StableFamily::new(gamma).unwrap();
        prop_assert!(f.density(x).unwrap() > 0.0);
        prop_assert!(f.ml_density(x.min(5.0)).unwrap() >= 0.0);
    }

    #[test]
    fn laplace_transform_of_samples(gamma in 0.2..0.9f64, s in 0.1..3.0f64) {
        let f = StableFamily::new(gamma).unwrap();
        let z = f.sample(5, 50_000).unwrap();
        let est = tdlab::stable::sample_mean(&z, |x| (-s * x).exp());
        prop_assert!((est.mean - f.laplace(s).unwrap()).abs() <= 5.0 * est.std_error + 1e-12);
    }

    #[test]
    fn observable_names_round_trip(c in -5.0..5.0f64, level in 0.1..9.0f64, j in 0u32..6) {
        for g in [Observable::Const(c), Observable::Identity, Observable::ExpDecay, Observable::Clamp(level), Observable::Power(j)] {
            prop_assert_eq!(g.to_string().parse::<Observable>().unwrap(), g);
        }
    }
}
