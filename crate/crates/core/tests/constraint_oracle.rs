mod support;

use hpe_core::constraint::{apply_stokes, constraint_residual, project, stokes_solve};
use hpe_core::forcing::{CompiledForcing, ForcingMode, ForcingSpec, Profile};
use hpe_core::{make_grid, SpectralField};
use proptest::prelude::*;

#[test]
fn projector_matches_dense_null_space() {
    for (m, n, k, h, seed) in [(8, 8, 8, 1.0, 1), (6, 8, 5, 2.5, 2), (4, 6, 3, 0.3, 3)] {
        let g = make_grid(m, n, k, h, None).unwrap();
        let v = SpectralField::random(&g, seed, 0.0);
        let err = project(&v).sub(&support::dense_project(&v)).norm();
        assert!(err <= 1e-13 * v.norm(), "{m}x{n}x{k} h={h}: {err:e}");
    }
}

#[test]
fn stokes_solve_matches_dense_bordered_system() {
    let g = make_grid(6, 6, 4, 1.5, None).unwrap();
    let b = SpectralField::random(&g, 8, 0.0);
    let (x, _) = stokes_solve(&b);
    let oracle = support::dense_stokes(&b);
    assert!(x.sub(&oracle).norm() <= 1e-12 * oracle.norm());
    assert!(constraint_residual(&x) <= 1e-13 * x.norm());
    // the defect of A x against b is a pure gradient, so projecting kills it
    let defect = project(&b.sub(&apply_stokes(&x)));
    assert!(defect.norm() <= 1e-11 * b.norm());
}

#[test]
fn depth_uniform_forcing_has_closed_form_coefficients() {
    let g = make_grid(4, 4, 6, 1.7, None).unwrap();
    let fs = ForcingSpec {
        period: None,
        steady: true,
        modes: vec![ForcingMode {
            m: 1,
            n: 0,
            profile: Profile::Constant,
            amplitude: [[0.0, 0.0], [2.0, -1.0]],
            q: 0,
            phase: 0.0,
        }],
    };
    let f = CompiledForcing::new(&fs, &g).unwrap().eval(0.0);
    for k in 0..g.k() {
        // half the amplitude times ∫ψ_k = h·mean
        let expect = 0.5 * g.h() * support::vertical_mean(g.h(), k);
        let got = f.get(1, 0, k, 1);
        assert!((got.re - 2.0 * expect).abs() <= 1e-14 && (got.im + expect).abs() <= 1e-14, "k={k}: {got}");
        assert_eq!(f.get(1, 0, k, 0).norm(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projector_properties(seed in any::<u64>(), decay in 0.0f64..1.5, scale in 1e-3f64..1e3) {
        let g = make_grid(8, 8, 5, 1.0, None).unwrap();
        let u = SpectralField::random(&g, seed, decay).scaled(scale);
        let v = SpectralField::random(&g, seed.wrapping_add(1), decay);
        let pu = project(&u);
        prop_assert!(project(&pu).sub(&pu).norm() <= 1e-14 * u.norm());
        prop_assert!((pu.inner(&v) - u.inner(&project(&v))).abs() <= 1e-14 * u.norm() * v.norm());
        prop_assert!(pu.norm() <= u.norm());
        prop_assert!(constraint_residual(&pu) <= 1e-13 * u.norm());
    }
}
