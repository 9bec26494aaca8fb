use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qfilt_core::filters::{counting_increment, homodyne_increment, pi_step_counting, pi_step_homodyne};
use qfilt_core::hilbert::{adjoint_generator, lindblad_generator, repair_state};
use qfilt_core::oracle::{random_step, RandomStep};
use qfilt_core::qsc::sample_counting_version;
use qfilt_core::{ComplexMatrix, HermitianObservable};

fn instance(seed: u64, dim: usize) -> RandomStep {
    random_step(&mut ChaCha8Rng::seed_from_u64(seed), dim, 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generator_output_is_hermitian(seed in any::<u64>(), dim in 2usize..=4) {
        let s = instance(seed, dim);
        let g = lindblad_generator(&s.model, &s.observable).unwrap();
        prop_assert!(g.hermiticity_deviation() <= 1e-12);
    }

    #[test]
    fn generator_duality(seed in any::<u64>(), dim in 2usize..=4) {
        let s = instance(seed, dim);
        let rho = s.model.rho0();
        let heisenberg = lindblad_generator(&s.model, &s.observable).unwrap().trace_product(rho.matrix());
        let schrodinger = adjoint_generator(&s.model, rho).unwrap().trace_product(s.observable.matrix());
        prop_assert!((heisenberg - schrodinger).norm() <= 1e-12);
    }

    #[test]
    fn unital_and_trace_preserving(seed in any::<u64>(), dim in 2usize..=4) {
        let s = instance(seed, dim);
        let on_identity = lindblad_generator(&s.model, &HermitianObservable::identity(dim)).unwrap();
        prop_assert!(on_identity.max_abs() <= 1e-12);
        prop_assert!(adjoint_generator(&s.model, s.model.rho0()).unwrap().trace().norm() <= 1e-12);
    }

    #[test]
    fn repair_is_idempotent(seed in any::<u64>(), dim in 2usize..=4, shift in 0.0f64..1e-3) {
        let s = instance(seed, dim);
        let mut perturbed = s.model.rho0().matrix().clone();
        perturbed.add_scaled(&ComplexMatrix::identity(dim), -shift);
        let once = repair_state(&perturbed, 0.05).unwrap();
        let twice = repair_state(once.matrix(), 0.05).unwrap();
        prop_assert!((once.matrix() - twice.matrix()).max_abs() <= 1e-14);
    }

    #[test]
    fn homodyne_forms_agree(seed in any::<u64>(), dim in 2usize..=4) {
        let s = instance(seed, dim);
        let rho = s.model.rho0();
        let moment = pi_step_homodyne(&s.model, rho, &s.observable, s.dy, s.dt).unwrap();
        let delta = homodyne_increment(&s.model, rho, s.dy, s.dt).unwrap();
        prop_assert!((moment - delta.trace_product(s.observable.matrix()).re).abs() <= 1e-12);
    }

    #[test]
    fn counting_forms_agree(seed in any::<u64>(), dim in 2usize..=4, jump in any::<bool>()) {
        let s = instance(seed, dim);
        let rho = s.model.rho0();
        let dn = if jump { 1.0 } else { 0.0 };
        let moment = pi_step_counting(&s.model, rho, &s.observable, dn, s.dt).unwrap();
        let delta = counting_increment(&s.model, rho, dn, s.dt).unwrap();
        prop_assert!((moment - delta.trace_product(s.observable.matrix()).re).abs() <= 1e-12);
    }

    #[test]
    fn counting_paths_are_monotone(seed in any::<u64>(), rate in 0.0f64..50.0) {
        let grid: Vec<f64> = (0..=500).map(|k| k as f64 * 2e-3).collect();
        let path = sample_counting_version(&|_| rate, &grid, seed).unwrap();
        prop_assert_eq!(path.values[0], 0.0);
        prop_assert!(path.values.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1.0));
    }
}
