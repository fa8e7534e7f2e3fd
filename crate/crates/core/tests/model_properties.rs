use irsbf_core::fixtures::random_instance;
use irsbf_core::linalg::{self, CMat};
use irsbf_core::model::{
    effective_channel, interference_noise_cov, signal_plus_impairment_cov, user_rates, weighted_sum_rate, wrap_phase,
};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (u64, usize, usize, usize, usize, usize)> {
    (any::<u64>(), 1usize..5, 1usize..4, 1usize..7, 1usize..4)
        .prop_flat_map(|(seed, m, nr, n, k)| (Just(seed), Just(m), Just(nr), Just(n), Just(k), 1..=nr.min(m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariances_are_hermitian_psd((seed, m, nr, n, k, ns) in dims()) {
        let (est, err, state) = random_instance(seed, m, nr, n, k, ns);
        for user in 0..k {
            for cov in [
                interference_noise_cov(&est, &err, &state, user).unwrap(),
                signal_plus_impairment_cov(&est, &err, &state, user).unwrap(),
            ] {
                prop_assert!(linalg::hermitian_defect(&cov) <= 1e-12);
                let ev = linalg::hermitian_eigenvalues(&cov);
                let norm = linalg::fro_norm_sq(&cov).sqrt();
                prop_assert!(ev[0] >= -1e-10 * norm, "eigenvalues {:?}", ev);
            }
        }
    }

    #[test]
    fn interference_is_impairment_plus_noise_minus_own_signal((seed, m, nr, n, k, ns) in dims()) {
        let (est, err, state) = random_instance(seed, m, nr, n, k, ns);
        for user in 0..k {
            let j = interference_noise_cov(&est, &err, &state, user).unwrap();
            let q = signal_plus_impairment_cov(&est, &err, &state, user).unwrap();
            let hw = effective_channel(&est, user, &state.phi).unwrap() * &state.w[user];
            let rebuilt = q + linalg::identity(nr).scale(err.sigma2_n[user]) - &hw * hw.adjoint();
            prop_assert!(linalg::rel_fro_err(&rebuilt, &j) <= 1e-10);
        }
    }

    #[test]
    fn rates_are_nonnegative_and_weighted((seed, m, nr, n, k, ns) in dims()) {
        let (est, err, state) = random_instance(seed, m, nr, n, k, ns);
        let rates = user_rates(&est, &err, &state).unwrap();
        prop_assert!(rates.iter().all(|&r| r >= 0.0 && r.is_finite()));
        let wsr: f64 = rates.iter().zip(&state.omega).map(|(r, w)| r * w).sum();
        prop_assert!((weighted_sum_rate(&est, &err, &state).unwrap() - wsr).abs() <= 1e-12 * wsr.max(1.0));
    }

    #[test]
    fn phases_do_not_matter_without_reflected_links((seed, m, nr, n, k, ns) in dims(), shift in 0.0..6.3f64) {
        let (mut est, err, state) = random_instance(seed, m, nr, n, k, ns);
        est.hr = vec![CMat::zeros(n, nr); k];
        let moved: Vec<f64> = state.phi.iter().map(|p| p + shift).collect();
        let a = weighted_sum_rate(&est, &err, &state).unwrap();
        let b = weighted_sum_rate(&est, &err, &state.with_phases(&moved)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn wrapped_phases_lie_in_range(p in -1e4..1e4f64) {
        let w = wrap_phase(p);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
        prop_assert!(((w - p) / std::f64::consts::TAU - ((w - p) / std::f64::consts::TAU).round()).abs() < 1e-9);
    }
}
