use dpgstar::linalg::{CMat, CVec};
use dpgstar::mixed_core::{
    self, dual_energy_norm, kernel_decompose, random, solve_mixed, MixedSystem, IDENTITY_TOL,
};
use dpgstar::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn system(seed: u64, max_n: usize) -> MixedSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = random::dims(&mut rng, max_n);
    random::system(&mut rng, n, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_relation_holds_on_random_systems(seed in any::<u64>(), max_n in 2usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = dpgstar::experiments::random_system_report(&mut rng, max_n).unwrap();
        for r in &report.records {
            prop_assert!(r.passed, "{r:?}");
            prop_assert!(r.relative_violation() <= IDENTITY_TOL, "{r:?}");
        }
        prop_assert_eq!(report.records.len(), mixed_core::RELATION_NAMES.len());
    }

    #[test]
    fn solve_is_exact_on_its_residuals(seed in any::<u64>()) {
        let sys = system(seed, 40);
        let sol = solve_mixed(&sys).unwrap();
        prop_assert!(sol.residuals_within(&sys, 1e-10));
    }

    #[test]
    fn kernel_split_is_orthogonal_and_sums(seed in any::<u64>()) {
        let sys = system(seed, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let psi = random::vector(&mut rng, sys.test_dim());
        let k = kernel_decompose(&sys, &psi).unwrap();
        let sum = &k.psi0 + &k.psi_perp - &psi;
        prop_assert!(sum.norm() <= 1e-12 * psi.norm());
        // psi0 lies in the kernel of Bᴴ and is G-orthogonal to psi_perp.
        prop_assert!((sys.b_matrix.adjoint() * &k.psi0).norm() <= 1e-10 * psi.norm() * sys.b_matrix.norm());
        let cross = k.psi0.dotc(&(sys.gram.matrix() * &k.psi_perp)).norm();
        prop_assert!(cross <= 1e-10 * sys.gram.norm(&psi).powi(2));
    }

    #[test]
    fn zero_load_selects_orthogonal_component(seed in any::<u64>()) {
        let s = system(seed, 30);
        let sys = MixedSystem::new(s.gram.clone(), s.b_matrix.clone(), CVec::zeros(s.test_dim()), s.load_g.clone()).unwrap();
        let sol = solve_mixed(&sys).unwrap();
        let k = kernel_decompose(&sys, &sol.psi).unwrap();
        prop_assert!(k.psi0.norm() <= 1e-10 * sol.psi.norm());
    }

    #[test]
    fn dual_norm_identity_for_arbitrary_psi(seed in any::<u64>()) {
        let sys = system(seed, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let psi = random::vector(&mut rng, sys.test_dim());
        let lhs = dual_energy_norm(&sys, &(sys.b_matrix.adjoint() * &psi)).unwrap();
        let rhs = sys.gram.norm(&kernel_decompose(&sys, &psi).unwrap().psi_perp);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs));
    }

    #[test]
    fn scaling_the_data_scales_the_solution(seed in any::<u64>(), s in 0.1f64..10.0) {
        let sys = system(seed, 20);
        let a = solve_mixed(&sys).unwrap();
        let c = Complex64::new(s, -0.5 * s);
        let scaled = MixedSystem::new(sys.gram.clone(), sys.b_matrix.clone(), &sys.load_l * c, &sys.load_g * c).unwrap();
        let b = solve_mixed(&scaled).unwrap();
        prop_assert!((&a.u * c - &b.u).norm() <= 1e-10 * b.u.norm());
        prop_assert!((&a.psi * c - &b.psi).norm() <= 1e-10 * b.psi.norm());
    }
}

#[test]
fn random_systems_are_well_conditioned() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let (n, m) = random::dims(&mut rng, 40);
        assert!(n >= 2 && m >= 1 && m < n);
        let b: CMat = random::full_rank(&mut rng, n, m);
        let sv = b.clone().svd(false, false).singular_values;
        assert!(sv.iter().all(|&s| s > 1e-6));
    }
}
