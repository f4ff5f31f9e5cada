//! Property-based invariants over randomized fields.

use kspde_core::coeffs::{sqrt_matrix, SymMat};
use kspde_core::kinetic::{kinetic_function, XiGrid};
use kspde_core::noise::{apply_noise, sample_path, NoiseModel};
use kspde_core::torus::{
    divergence, gradient, h_negative_norm, lp_norm, read_field, spectral_l2, write_field,
    MollifierKernel, ScalarField, TorusGrid,
};
use proptest::prelude::*;

fn field_strategy(n: usize) -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-10.0f64..10.0, n).prop_map(move |values| {
        ScalarField::from_values(TorusGrid::new(1, n).unwrap(), values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_norm_is_homogeneous_and_subadditive(u in field_strategy(32), v in field_strategy(32), c in -5.0f64..5.0, p in 1.0f64..6.0) {
        let nu = lp_norm(&u, p).unwrap();
        let scaled = lp_norm(&u.scaled(c), p).unwrap();
        prop_assert!((scaled - c.abs() * nu).abs() <= 1e-10 * (1.0 + nu));
        let mut sum = u.clone();
        sum.axpy(1.0, &v);
        let triangle = lp_norm(&sum, p).unwrap();
        prop_assert!(triangle <= nu + lp_norm(&v, p).unwrap() + 1e-10);
    }

    #[test]
    fn parseval_holds_on_random_fields(u in field_strategy(64)) {
        let direct = lp_norm(&u, 2.0).unwrap();
        let spectral = spectral_l2(&u);
        prop_assert!((direct - spectral).abs() <= 1e-10 * direct.max(1e-12));
    }

    #[test]
    fn integration_by_parts_on_random_fields(u in field_strategy(32), v in field_strategy(32)) {
        let lhs = u.inner(&divergence(&[v.clone()]).unwrap());
        let rhs = -gradient(&u)[0].inner(&v);
        let scale = u.max_abs().max(v.max_abs()).max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale * scale);
    }

    #[test]
    fn h_negative_norm_monotone_in_order(u in field_strategy(32), s1 in 0.1f64..1.5, ds in 0.1f64..1.5) {
        let a = h_negative_norm(&u, s1).unwrap();
        let b = h_negative_norm(&u, s1 + ds).unwrap();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn mollification_never_expands_l2(u in field_strategy(64), width in 0.02f64..0.4) {
        let kernel = MollifierKernel::spatial(width).on_grid(u.grid()).unwrap();
        let smoothed = kernel.convolve(&u).unwrap();
        prop_assert!(lp_norm(&smoothed, 2.0).unwrap() <= lp_norm(&u, 2.0).unwrap() + 1e-10);
        prop_assert!(lp_norm(&smoothed, 1.0).unwrap() <= lp_norm(&u, 1.0).unwrap() + 1e-10);
        prop_assert!((smoothed.mean() - u.mean()).abs() <= 1e-12 * (1.0 + u.max_abs()));
    }

    #[test]
    fn noise_application_respects_growth_bound(u in field_strategy(32), seed in 0u64..1000) {
        let model = NoiseModel::bounded_nonlinear(8);
        let path = sample_path(seed, 1, 0.01, 8);
        let incr = path.step_increments(0);
        let out = apply_noise(&model, &u, incr).unwrap();
        let incr_norm = incr.iter().map(|d| d * d).sum::<f64>().sqrt();
        for (ui, v) in u.values().iter().zip(out.values()) {
            let bound = (model.growth_constant() * (1.0 + ui * ui)).sqrt() * incr_norm;
            prop_assert!(v.abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn kinetic_function_rows_are_monotone(u in field_strategy(16)) {
        let xi = XiGrid::new(-12.0, 12.0, 64).unwrap();
        let f = kinetic_function(&u, &xi);
        for i in 0..16 {
            for j in 1..64 {
                prop_assert!(f[i * 64 + j] <= f[i * 64 + j - 1]);
            }
        }
    }

    #[test]
    fn psd_square_roots_reconstruct(m00 in -2.0f64..2.0, m01 in -2.0f64..2.0, m10 in -2.0f64..2.0, m11 in -2.0f64..2.0) {
        let a = SymMat::new_2d(
            m00 * m00 + m10 * m10,
            m00 * m01 + m10 * m11,
            m01 * m01 + m11 * m11,
        );
        let s = sqrt_matrix(&a).unwrap();
        prop_assert!(s.square().frobenius_distance(&a) <= 1e-8);
    }

    #[test]
    fn field_files_round_trip(u in field_strategy(32), t in 0.0f64..10.0) {
        let mut buf = Vec::new();
        write_field(&mut buf, &u, t).unwrap();
        let (v, tt) = read_field(&mut std::io::BufReader::new(&buf[..])).unwrap();
        prop_assert_eq!(t.to_bits(), tt.to_bits());
        for (a, b) in u.values().iter().zip(v.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
