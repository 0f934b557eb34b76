mod support;

use hpe_core::constraint::project;
use hpe_core::forcing::{forcing_eval, ForcingMode, ForcingSpec, Profile};
use hpe_core::integrator::{integrate_with, IntegratorOptions};
use hpe_core::periodic::{
    newton_with, picard_with, steady_solve_with, PoincareMap, ShootOptions, SteadyOptions,
};
use hpe_core::{make_grid, SpectralField};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Worst relative error of the e^{iωt} amplitudes of the computed linear
/// orbit. For a single harmonic the discrete orbit is C e^{iωt} + D e^{−iωt},
/// so C = (a(0) − i a(T/4))/2.
fn linear_orbit_error(dt: f64) -> f64 {
    let g = make_grid(8, 8, 4, 1.0, None).unwrap();
    let fs = ForcingSpec::preset("shear_pair", 1.0, 1.0).unwrap();
    let map = PoincareMap::new(&g, &fs, 1.0, dt, false).unwrap();
    let opts = ShootOptions {
        tol: 1e-13,
        ..ShootOptions::default()
    };
    let r = picard_with(&map, &SpectralField::zeros(&g), &opts).unwrap();
    let lin = IntegratorOptions {
        nonlinear: false,
        cfl: 0.0,
        ..IntegratorOptions::default()
    };
    let (quarter, _, _) = integrate_with(&r.a_star, 0.0, 0.25, dt, &fs, 1000, lin).unwrap();
    let i = Complex64::new(0.0, 1.0);
    let mut worst = 0.0f64;
    for ((m, n, k, c), exact) in support::harmonic_response(&fs, &g) {
        let got = (r.a_star.get(m, n, k, c) - i * quarter.v.get(m, n, k, c)) * 0.5;
        worst = worst.max((got - exact).norm() / exact.norm());
    }
    // nothing else is excited
    let mut rest = r.a_star.clone();
    for ((m, n, k, c), _) in support::harmonic_response(&fs, &g) {
        rest.set_mode(m, n, k, c, Complex64::new(0.0, 0.0));
    }
    assert!(rest.norm() <= 1e-13, "unforced modes moved: {:e}", rest.norm());
    worst
}

#[test]
fn linear_orbit_matches_closed_form_response() {
    let e1 = linear_orbit_error(2e-3);
    let e2 = linear_orbit_error(1e-3);
    assert!(e2 <= 3.0 * 1e-6, "relative error {e2:e}");
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() <= 0.3, "order {order}");
}

#[test]
fn composing_the_map_equals_one_long_run() {
    // steady forcing, so both runs see bit-identical inputs
    let g = make_grid(8, 8, 4, 1.0, None).unwrap();
    let fs = ForcingSpec::preset("channel_steady", 1.0, 2.0).unwrap();
    let a = project(&SpectralField::random(&g, 3, 1.0));
    let map = PoincareMap::new(&g, &fs, 0.5, 5e-3, true).unwrap();
    let twice = map.apply(&map.apply(&a).unwrap()).unwrap();
    let opts = IntegratorOptions {
        cfl: 0.0,
        ..IntegratorOptions::default()
    };
    let (s, _, _) = integrate_with(&a, 0.0, 1.0, 5e-3, &fs, 50, opts).unwrap();
    assert!(support::bit_equal(&twice, &s.v));
}

#[test]
fn newton_and_picard_find_the_same_orbit() {
    let g = make_grid(8, 8, 4, 1.0, None).unwrap();
    let fs = ForcingSpec::preset("channel", 1.0, 5.0).unwrap();
    let map = PoincareMap::new(&g, &fs, 1.0, 5e-3, true).unwrap();
    let opts = ShootOptions {
        tol: 1e-10,
        ..ShootOptions::default()
    };
    let a0 = SpectralField::zeros(&g);
    let p = picard_with(&map, &a0, &opts).unwrap();
    let n = newton_with(&map, &a0, &opts).unwrap();
    assert!(p.orbit_verified && n.orbit_verified);
    assert!(p.dissipation.pass && n.dissipation.pass);
    assert!(p.a_star.sub(&n.a_star).norm() <= 10.0 * opts.tol);
    assert!(n.iterations <= 15 && p.iterations <= 200);
}

/// Steady forcing ε A φ₀ for the mode pair used by the perturbation check,
/// and the unit pattern φ₀ itself.
fn perturbation_problem(g: &std::sync::Arc<hpe_core::Grid>, eps: f64) -> (ForcingSpec, SpectralField) {
    let pair = [(0i64, 1i64, 0usize, 0usize, 1.0), (1, 0, 1, 1, 0.6)];
    let build = |scale: &dyn Fn(i64, i64, usize) -> f64| ForcingSpec {
        period: None,
        steady: true,
        modes: pair
            .iter()
            .map(|&(m, n, k, c, a)| {
                let mut amplitude = [[0.0; 2]; 2];
                amplitude[c][0] = a * scale(m, n, k);
                ForcingMode {
                    m,
                    n,
                    profile: Profile::Sine { k },
                    amplitude,
                    q: 0,
                    phase: 0.0,
                }
            })
            .collect(),
    };
    let lam = |m: i64, n: i64, k: usize| 4.0 * PI * PI * (m * m + n * n) as f64 + support::mu(g.h(), k).powi(2);
    let fs = build(&|m, n, k| eps * lam(m, n, k));
    let phi0 = forcing_eval(&build(&|_, _, _| 1.0), 0.0, g).unwrap();
    (fs, phi0)
}

#[test]
fn weak_steady_forcing_follows_the_two_term_expansion() {
    let g = make_grid(8, 8, 4, 1.0, None).unwrap();
    let opts = SteadyOptions {
        tol: 1e-13,
        check_period: 0.1,
        check_dt: 1e-2,
        ..SteadyOptions::default()
    };
    let (_, phi0) = perturbation_problem(&g, 1.0);
    let v2 = support::dense_stokes(&support::advect_oracle(&phi0, &phi0).scaled(-1.0));
    assert!(v2.norm() > 1e-3, "the pattern must self-interact");
    let mut one = Vec::new();
    let mut two = Vec::new();
    for eps in [4e-2, 2e-2, 1e-2] {
        let (fs, _) = perturbation_problem(&g, eps);
        let v = steady_solve_with(&fs, &g, &opts).unwrap().v;
        let lin = phi0.scaled(eps);
        one.push(v.sub(&lin).norm());
        two.push(v.sub(&lin).sub(&v2.scaled(eps * eps)).norm());
    }
    for i in 0..2 {
        let s1 = (one[i] / one[i + 1]).log2();
        let s2 = (two[i] / two[i + 1]).log2();
        assert!((s1 - 2.0).abs() <= 0.3, "first-order remainder slope {s1}");
        assert!((s2 - 3.0).abs() <= 0.3, "second-order remainder slope {s2}");
    }
}

#[test]
fn steady_state_is_a_fixed_point_of_the_map() {
    let g = make_grid(8, 8, 4, 1.0, None).unwrap();
    let fs = ForcingSpec::preset("channel_steady", 1.0, 10.0).unwrap();
    let opts = SteadyOptions {
        check_dt: 2e-3,
        ..SteadyOptions::default()
    };
    let r = steady_solve_with(&fs, &g, &opts).unwrap();
    assert!(r.residual <= 1e-10);
    assert!(r.fixed_point_defect.unwrap() <= 1e-8);
}
