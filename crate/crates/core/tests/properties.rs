use num_complex::Complex64;
use proptest::prelude::*;

use slowfast::config::Config;
use slowfast::dynamics::exact_example_solution;
use slowfast::experiments::{compare_manifolds, sample_slow_field, GraphMethod};
use slowfast::manifolds::{galerkin_manifold_explicit, resonance_set, safe_bound_key};
use slowfast::spectral::{
    convolve, convolve_fft, project_slow, sobolev_norm, DiagonalOperator, FourierField, SobolevIndex, SpectralSplit,
};

fn field(k_max: usize) -> impl Strategy<Value = FourierField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * k_max + 1).prop_map(move |c| {
        let coeffs = c.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
        FourierField::from_coeffs(coeffs, true)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_and_direct_convolution_agree(a in field(5), b in field(5)) {
        let d = convolve(&a, &b, 10);
        let f = convolve_fft(&a, &b, 10);
        prop_assert!((&d - &f).max_abs() < 1e-12);
    }

    #[test]
    fn sobolev_norm_grows_with_order(a in field(4), s in 0.0f64..3.0) {
        let lo = sobolev_norm(&a, SobolevIndex::h(s));
        let hi = sobolev_norm(&a, SobolevIndex::h(s + 0.5));
        prop_assert!(hi >= lo * (1.0 - 1e-14));
        let scaled = sobolev_norm(&a.scale(-3.0), SobolevIndex::h(s));
        prop_assert!((scaled - 3.0 * lo).abs() <= 1e-12 * (1.0 + lo));
    }

    #[test]
    fn split_is_a_partition(k0 in 1usize..8) {
        let op = DiagonalOperator::laplacian_minus_one();
        let split = SpectralSplit::for_cutoff(&op, k0, -0.95);
        prop_assert!(split.check_invariants(&op));
        prop_assert!(split.gap() > 0.0);
        prop_assert!(split.eta < 0.0);
    }

    #[test]
    fn slow_manifold_is_quadratic(seed in 0u64..1000, k0 in 1usize..4, a in 0.1f64..3.0) {
        let v = sample_slow_field(seed, k0, 0, 1.0, 1.0);
        let eps = 1e-3;
        let h1 = galerkin_manifold_explicit(&v, eps, k0).unwrap();
        let h2 = galerkin_manifold_explicit(&v.scale(a), eps, k0).unwrap();
        prop_assert!((&h2 - &h1.scale(a * a)).max_abs() <= 1e-13 * (1.0 + a * a) * (1.0 + h1.max_abs()));
        prop_assert!(h1.support_max().unwrap_or(0) <= 2 * k0);
    }

    #[test]
    fn no_resonance_below_safe_bound(k0 in 0usize..9) {
        let set = resonance_set(k0, (0.0, 1.0));
        let safe = safe_bound_key(k0);
        prop_assert!(set.contains_half());
        for e in &set.entries {
            prop_assert!(e.key.cmp_exact(&safe) != std::cmp::Ordering::Less);
            prop_assert!(e.epsilon > 0.0 && e.epsilon < 1.0);
        }
    }

    #[test]
    fn closed_form_is_a_flow(seed in 0u64..1000, t1 in 0.0f64..0.2, t2 in 0.0f64..0.2, du in -0.1f64..0.1) {
        let (eps, k0) = (1e-2, 2);
        let v0 = sample_slow_field(seed, k0, 0, 1.0, 1.0);
        let on = galerkin_manifold_explicit(&v0, eps, k0).unwrap();
        let u0 = on.axpy(du, &FourierField::real_mode(1, on.resolution()));
        let a = exact_example_solution(&v0, &u0, eps, k0, t1 + t2).unwrap();
        let mid = exact_example_solution(&v0, &u0, eps, k0, t1).unwrap();
        let b = exact_example_solution(&project_slow(&mid.v, k0), &mid.u, eps, k0, t2).unwrap();
        prop_assert!((&a.u - &b.u).max_abs() < 1e-12);
        prop_assert!((&a.v - &b.v.resized(a.v.resolution())).max_abs() < 1e-14);
    }

    #[test]
    fn samples_are_reproducible(seed in any::<u64>(), k0 in 1usize..6, i in 0usize..50) {
        let a = sample_slow_field(seed, k0, i, 1.0, 1.0);
        prop_assert_eq!(&a, &sample_slow_field(seed, k0, i, 1.0, 1.0));
        prop_assert!((sobolev_norm(&a, SobolevIndex::y(1.0)) - 1.0).abs() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rows_plus_skips_cover_the_grid(
        eps in prop::sample::subsequence(vec![1e-4, 1e-3, 5e-3, 1e-2, 3e-2], 1..4),
        k0s in prop::sample::subsequence(vec![1usize, 2, 3, 4, 5], 1..4),
        samples in 1usize..4,
    ) {
        let mut cfg = Config::default();
        cfg.experiment.epsilons = eps.clone();
        cfg.experiment.k0s = k0s.clone();
        cfg.experiment.samples = samples;
        cfg.experiment.graph_method = GraphMethod::Explicit;
        let t = compare_manifolds(&cfg).unwrap();
        prop_assert_eq!(t.rows.len() + t.skips.len(), eps.len() * k0s.len() * samples);
    }
}
