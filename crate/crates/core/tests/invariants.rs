mod common;

use common::*;
use graphon_lqr::control::synthesize_exact;
use graphon_lqr::graphon::{sample_sbm, step_from_matrix, GridFunction, SbmSpec};
use graphon_lqr::linalg::{asymmetry, min_eigenvalue};
use graphon_lqr::riccati::{solve_riccati, PSD_TOL, SYMMETRY_TOL};
use graphon_lqr::subspace::{decompose, project_function, project_kernel, reconstruct, SubspaceBasis};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

fn sbm_network(size: usize, seed: u64) -> graphon_lqr::graphon::Graphon {
    let spec = SbmSpec::equal_blocks(sbm_probs(), size, seed).unwrap();
    step_from_matrix(sample_sbm(&spec), 1.0).unwrap()
}

fn weighted_network(size: usize, seed: u64) -> graphon_lqr::graphon::Graphon {
    let mut r = rng(seed);
    let m = random_matrix(&mut r, size, size, 1.0);
    step_from_matrix((&m + m.transpose()) * 0.5, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn graphon_operators_are_self_adjoint(size in 3usize..30, seed in any::<u64>()) {
        let g = weighted_network(size, seed);
        let mut r = rng(seed ^ 1);
        let u = random_state(&mut r, size, 1);
        let v = random_state(&mut r, size, 1);
        let lhs = u.inner(&g.apply(&v).unwrap()).unwrap();
        let rhs = g.apply(&u).unwrap().inner(&v).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let k = g.kernel_on_grid(size).unwrap();
        prop_assert!((&k - k.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn full_spectrum_reconstructs_the_kernel(size in 2usize..25, seed in any::<u64>()) {
        let g = weighted_network(size, seed);
        let spectrum = g.spectral_decomposition(size).unwrap();
        let f = spectrum.eigenfunctions.values_on_grid(size).unwrap();
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(spectrum.eigenvalues.clone()));
        // W/N = Σ λ_k v_k v_kᵀ with v_k = f_k / √N
        let rebuilt = &f * lambda * f.transpose() / size as f64;
        let kernel = g.kernel_on_grid(size).unwrap();
        prop_assert!((rebuilt - kernel).amax() <= 1e-8);
    }

    #[test]
    fn residual_annihilates_the_eigenbasis(size in 6usize..40, d in 1usize..4, seed in any::<u64>()) {
        let g = sbm_network(size, seed);
        let basis = SubspaceBasis::eigenbasis(&g, d).unwrap();
        let residual = g.residual(&basis).unwrap();
        let f = basis.values_on_grid(size).unwrap();
        for l in 0..d {
            let fl = GridFunction::new(f.columns(l, 1).into_owned()).unwrap();
            prop_assert!(residual.apply(&fl).unwrap().norm() <= 1e-10);
        }
    }

    #[test]
    fn operator_norm_is_the_largest_eigenvalue_magnitude(size in 2usize..30, seed in any::<u64>()) {
        let g = weighted_network(size, seed);
        let brute = SymmetricEigen::new(g.kernel_on_grid(size).unwrap())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((g.operator_norm() - brute).abs() <= 1e-10);
    }

    #[test]
    fn projection_is_idempotent(size in 4usize..30, n in 1usize..3, d in 1usize..4, seed in any::<u64>()) {
        prop_assume!(d <= size);
        let mut r = rng(seed);
        let basis = SubspaceBasis::from_grid(random_orthonormal(&mut r, size, d) * (size as f64).sqrt()).unwrap();
        let x = random_state(&mut r, size, n);
        let split = decompose(&x, &basis).unwrap();
        let again = decompose(&split.subspace_part, &basis).unwrap();
        prop_assert!((again.subspace_part.values() - split.subspace_part.values()).amax() <= 1e-12 * 5.0 * size as f64);
        prop_assert!(again.auxiliary_part.values().amax() <= 1e-12 * 5.0 * size as f64);
        let xp = project_function(&x, &basis).unwrap();
        let back = project_function(&reconstruct(&xp, &basis, size).unwrap(), &basis).unwrap();
        prop_assert!((back.coords() - xp.coords()).amax() <= 1e-12 * 5.0 * size as f64);
    }

    #[test]
    fn projection_commutes_with_the_coupling_on_invariant_subspaces(
        size in 6usize..40, d in 1usize..4, seed in any::<u64>()
    ) {
        let g = sbm_network(size, seed);
        let basis = SubspaceBasis::eigenbasis(&g, d).unwrap();
        let m = project_kernel(&g, &basis).unwrap();
        let mut r = rng(seed ^ 7);
        let x = random_state(&mut r, size, 1);
        let lhs = project_function(&g.apply(&x).unwrap(), &basis).unwrap();
        let rhs = &m * project_function(&x, &basis).unwrap().coords();
        prop_assert!((lhs.coords() - rhs).amax() <= 1e-8);
    }

    #[test]
    fn quadratic_forms_split_along_invariant_subspaces(
        size in 6usize..40, d in 1usize..4, seed in any::<u64>()
    ) {
        let g = sbm_network(size, seed);
        let basis = SubspaceBasis::eigenbasis(&g, d).unwrap();
        let m = project_kernel(&g, &basis).unwrap();
        let mut r = rng(seed ^ 3);
        let x = random_state(&mut r, size, 1);
        let xp = project_function(&x, &basis).unwrap();
        let split = decompose(&x, &basis).unwrap();
        let whole = x.inner(&g.apply(&x).unwrap()).unwrap();
        let parts = xp.coords().dot(&(&m * xp.coords()))
            + split.auxiliary_part.inner(&g.apply(&split.auxiliary_part).unwrap()).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-8 * (1.0 + whole.abs()));
    }

    #[test]
    fn decomposition_is_pythagorean(size in 4usize..30, n in 1usize..3, d in 1usize..4, seed in any::<u64>()) {
        prop_assume!(d <= size);
        let mut r = rng(seed);
        let basis = SubspaceBasis::from_grid(random_orthonormal(&mut r, size, d) * (size as f64).sqrt()).unwrap();
        let x = random_state(&mut r, size, n);
        let split = decompose(&x, &basis).unwrap();
        let xp = project_function(&x, &basis).unwrap();
        let total = x.norm_squared();
        prop_assert!((split.subspace_part.norm_squared() + split.auxiliary_part.norm_squared() - total).abs() <= 1e-10 * (1.0 + total));
        prop_assert!((xp.coords().norm_squared() - split.subspace_part.norm_squared()).abs() <= 1e-10 * (1.0 + total));
        prop_assert!(split.subspace_part.inner(&split.auxiliary_part).unwrap().abs() <= 1e-10 * (1.0 + total));
    }

    #[test]
    fn riccati_solutions_are_symmetric_psd(n in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n, 1.0);
        let b = random_matrix(&mut r, n, n, 1.0);
        let q = random_spd(&mut r, n, 0.0, 1.0);
        let qt = random_spd(&mut r, n, 0.0, 1.0);
        let p = solve_riccati(&a, &b, &q, &qt, 1.0, 100).unwrap();
        for m in p.matrices() {
            prop_assert!(asymmetry(m) <= SYMMETRY_TOL);
            prop_assert!(min_eigenvalue(m) >= -PSD_TOL);
        }
    }

    #[test]
    fn riccati_solutions_grow_with_the_state_weight(n in 1usize..4, eps in 0.01f64..1.0, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, n, 1.0);
        let b = random_matrix(&mut r, n, n, 1.0);
        let q = random_spd(&mut r, n, 0.0, 1.0);
        let qt = random_spd(&mut r, n, 0.0, 1.0);
        let eye = DMatrix::identity(n, n);
        let low = solve_riccati(&a, &b, &q, &qt, 1.0, 100).unwrap();
        let high = solve_riccati(&a, &b, &(&q + &eye * eps), &qt, 1.0, 100).unwrap();
        for (l, h) in low.matrices().iter().zip(high.matrices()) {
            prop_assert!(min_eigenvalue(&(h - l)) >= -1e-10);
        }
    }

    #[test]
    fn sbm_samples_are_deterministic(size in 3usize..60, seed in any::<u64>()) {
        let spec = SbmSpec::equal_blocks(sbm_probs(), size, seed).unwrap();
        let w = sample_sbm(&spec);
        prop_assert_eq!(&w, &sample_sbm(&spec));
        prop_assert_eq!(&w, &w.transpose());
        prop_assert!((0..size).all(|i| w[(i, i)] == 0.0));
        prop_assert!(w.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn nodal_controls_agree_with_the_centralized_field(
        size in 4usize..12, n in 1usize..3, d in 1usize..3, seed in 0u64..1000, t in 0.0f64..1.0
    ) {
        let (model, basis, x0) = exact_instance(seed, size, n, d);
        let law = synthesize_exact(&model, &basis, 50).unwrap();
        let field = law.control_field(t, &x0).unwrap();
        let xp = project_function(&x0, &basis).unwrap();
        let f = basis.values_on_grid(size).unwrap();
        for i in 0..size {
            let values = f.row(i).transpose();
            let u = law.evaluate_nodal(t, &x0.agent(i), &xp, &values).unwrap();
            prop_assert!((u - field.agent(i)).amax() <= 1e-12 * (1.0 + field.values().amax()));
        }
    }
}
