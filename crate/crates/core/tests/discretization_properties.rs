use std::collections::HashSet;

use dpgstar::acoustics::{self, AcousticsConfig, Goal, TestNorm};
use dpgstar::error_measures::{consistency_residual, goal_orthogonality_check};
use dpgstar::linalg::{self, CVec};
use dpgstar::mesh::build_mesh;
use dpgstar::mixed_core::random;
use dpgstar::solver::{self, Discretization, Method};
use dpgstar::spaces::{
    build_test_layout_with, build_trial_layout, gauss_rule, NodalBasis, TestFamily,
};
use dpgstar::Execution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config() -> impl Strategy<Value = AcousticsConfig> {
    (
        0.25f64..3.0,
        0.0f64..360.0,
        1usize..=3,
        0usize..=2,
        any::<bool>(),
    )
        .prop_map(|(w, a, p, dp, rt)| {
            let family = if rt {
                TestFamily::RaviartThomas
            } else {
                TestFamily::Tensor
            };
            AcousticsConfig::new(w, a, p, dp).with_test_family(family)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauss_rules_integrate_monomials_exactly(n in 1usize..=10, k in 0usize..20) {
        prop_assume!(k < 2 * n);
        let rule = gauss_rule(n).unwrap();
        let v = rule.integrate(|x| x.powi(k as i32));
        prop_assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn nodal_basis_is_a_partition_of_unity(order in 0usize..=9, x in 0.0f64..=1.0) {
        let (v, d) = NodalBasis::new(order).eval(x);
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn signed_incidences_cancel_on_interior_edges(nx in 1usize..=6, ny in 1usize..=6) {
        let mesh = build_mesh(nx, ny).unwrap();
        let mut sum = vec![0i32; mesh.edges.len()];
        let mut count = vec![0usize; mesh.edges.len()];
        for el in &mesh.elements {
            for s in &el.sides {
                sum[s.edge] += s.sign as i32;
                count[s.edge] += 1;
            }
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            if edge.is_boundary {
                prop_assert_eq!(count[e], 1);
                prop_assert_eq!(sum[e].abs(), 1);
            } else {
                prop_assert_eq!(count[e], 2);
                prop_assert_eq!(sum[e], 0);
            }
        }
        prop_assert_eq!(build_mesh(nx, ny).unwrap(), mesh);
    }

    #[test]
    fn locate_finds_the_containing_element(nx in 1usize..=8, ny in 1usize..=8, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let mesh = build_mesh(nx, ny).unwrap();
        let k = mesh.locate([x, y]).unwrap();
        prop_assert!(mesh.elements[k].contains([x, y]));
    }

    #[test]
    fn trial_dofs_cover_every_global_index(nx in 1usize..=5, ny in 1usize..=5, p in 1usize..=5) {
        let mesh = build_mesh(nx, ny).unwrap();
        let t = build_trial_layout(&mesh, p).unwrap();
        let mut hit = vec![false; t.total];
        for el in &t.elements {
            let local: HashSet<usize> = el.global.iter().copied().collect();
            prop_assert_eq!(local.len(), el.global.len());
            for &g in &el.global {
                hit[g] = true;
            }
        }
        prop_assert!(hit.iter().all(|&h| h));
        let interior = mesh.edges.iter().filter(|e| !e.is_boundary).count();
        let vertices = (nx + 1) * (ny + 1);
        let expected = 3 * p * p * nx * ny + vertices + (p - 1) * mesh.edges.len() + p * interior;
        prop_assert_eq!(t.total, expected);
    }

    #[test]
    fn test_layout_sizes(nx in 1usize..=4, p in 1usize..=4, dp in 0usize..=3, rt in any::<bool>()) {
        let mesh = build_mesh(nx, nx).unwrap();
        let family = if rt { TestFamily::RaviartThomas } else { TestFamily::Tensor };
        let t = build_test_layout_with(&mesh, p, dp, family).unwrap();
        let k = p + dp;
        let per = if rt { (k + 1) * (k + 1) + 2 * (k + 1) * k } else { 3 * (k + 1) * (k + 1) };
        prop_assert_eq!(t.per_element(), per);
        prop_assert_eq!(t.total(), per * nx * nx);
    }

    #[test]
    fn plane_wave_is_consistent(cfg in config(), nx in 1usize..=2) {
        let disc = Discretization::new(cfg, nx, nx).unwrap();
        let (worst, scale) = consistency_residual(&disc).unwrap();
        prop_assert!(worst <= 1e-8 * scale, "{worst} vs {scale}");
    }

    #[test]
    fn unit_scaled_graph_equals_adjoint_graph(cfg in config()) {
        let mesh = build_mesh(1, 1).unwrap();
        let test = build_test_layout_with(&mesh, cfg.p, cfg.dp, cfg.test_family).unwrap();
        let a = acoustics::assemble_element_gram(&cfg, &mesh.elements[0], &test).unwrap();
        let b = acoustics::assemble_element_gram(&cfg.with_norm(TestNorm::ScaledGraph(1.0)), &mesh.elements[0], &test).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x == y));
    }

    #[test]
    fn quadrature_is_saturated(cfg in config()) {
        let mesh = build_mesh(2, 2).unwrap();
        let trial = build_trial_layout(&mesh, cfg.p).unwrap();
        let test = build_test_layout_with(&mesh, cfg.p, cfg.dp, cfg.test_family).unwrap();
        let boosted = AcousticsConfig { quad_boost: 6, ..cfg };
        for k in 0..mesh.n_elements() {
            let b0 = acoustics::assemble_element_b(&cfg, &mesh, k, &trial, &test).unwrap();
            let b1 = acoustics::assemble_element_b(&boosted, &mesh, k, &trial, &test).unwrap();
            prop_assert!(linalg::max_abs(&(&b0 - &b1)) <= 1e-9 * linalg::max_abs(&b0));
            let g0 = acoustics::assemble_element_gram(&cfg, &mesh.elements[k], &test).unwrap();
            let g1 = acoustics::assemble_element_gram(&boosted, &mesh.elements[k], &test).unwrap();
            prop_assert!(linalg::max_abs(&(&g0 - &g1)) <= 1e-9 * linalg::max_abs(&g0));
            let l0 = acoustics::assemble_load_primal(&cfg, &mesh, k, &test).unwrap();
            let l1 = acoustics::assemble_load_primal(&boosted, &mesh, k, &test).unwrap();
            prop_assert!(linalg::max_abs_vec(&(&l0 - &l1)) <= 1e-9 * linalg::max_abs_vec(&l0).max(1e-300));
        }
    }

    #[test]
    fn stiffness_is_hermitian_and_execution_independent(cfg in config()) {
        let par = Discretization::new(cfg, 2, 2).unwrap().with_execution(Execution::Parallel);
        let seq = par.clone().with_execution(Execution::Sequential);
        let g = par.adjoint_load(&Goal::Manufactured).unwrap();
        let a = solver::assemble_global(&par.trial, solver::condense_all(&par).unwrap(), &g, Method::Dpg).unwrap().stiffness_dense();
        let b = solver::assemble_global(&seq.trial, solver::condense_all(&seq).unwrap(), &g, Method::Dpg).unwrap().stiffness_dense();
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
        prop_assert!(linalg::hermitian_defect(&a) <= 1e-12 * linalg::max_abs(&a));
    }

    #[test]
    fn random_goals_are_orthogonal_to_the_primal_error(cfg in config(), seed in any::<u64>()) {
        let disc = Discretization::new(cfg, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal: CVec = random::vector(&mut rng, disc.trial.total);
        let primal = solver::run(&disc, Method::Dpg, &Goal::Manufactured).unwrap();
        let dual = solver::run(&disc, Method::DpgStar, &Goal::Custom(goal)).unwrap();
        let o = goal_orthogonality_check(&disc, &primal, &dual).unwrap();
        prop_assert!(o.within(1e-8), "{o:?}");
    }

    #[test]
    fn dpg_and_dpgstar_residuals_vanish(cfg in config()) {
        let disc = Discretization::new(cfg, 2, 2).unwrap();
        let (a, b) = solver::run_pair(&disc, &Goal::UniformPressure, 0).unwrap();
        prop_assert!(a.residuals.stiffness_rel <= 1e-10);
        prop_assert!(b.residuals.constraint_abs <= 1e-9 * b.residuals.constraint_scale);
    }
}
