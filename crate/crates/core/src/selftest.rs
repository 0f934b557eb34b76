//! Quick invariant suite run by `hpe selftest`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::constraint::{constraint_residual, project};
use crate::diagnostics::poincare_check;
use crate::dynamics::{advect, compute_w, nonlinear_term, AdvectionTerms};
use crate::error::Result;
use crate::field::{SpectralField, X};
use crate::forcing::{CompiledForcing, ForcingSpec};
use crate::grid::make_grid;
use crate::integrator::{energy_balance_residual, integrate, State};
use crate::io::checkpoint;
use crate::periodic::{ball_radius, picard_solve, poincare_map, steady_solve_with, SteadyOptions};
use crate::transform::{to_physical, to_spectral};

#[derive(Clone, Debug, Serialize)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<SelftestCheck>,
    pub pass: bool,
}

fn check(name: &'static str, pass: bool, detail: String) -> SelftestCheck {
    if pass {
        log::info!("selftest {name}: ok ({detail})");
    } else {
        log::error!("selftest {name}: FAILED ({detail})");
    }
    SelftestCheck { name, pass, detail }
}

type Check = fn(u64) -> Result<(bool, String)>;

/// Run every check; errors inside a check count as failures.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let cases: Vec<(&'static str, Check)> = vec![
        ("transform_round_trip", transform_round_trip),
        ("projector", projector),
        ("vertical_velocity", vertical_velocity),
        ("skew_symmetry", skew_symmetry),
        ("duality", duality),
        ("poincare_ratio", poincare_ratio),
        ("energy_identity", energy_identity),
        ("linear_decay", linear_decay),
        ("ball_radius", ball_radius_closed_form),
        ("checkpoint", checkpoint_round_trip),
        ("picard_unforced", picard_unforced),
        ("steady_unforced", steady_unforced),
    ];
    let checks: Vec<SelftestCheck> = cases
        .into_iter()
        .map(|(name, f)| match f(seed) {
            Ok((pass, detail)) => check(name, pass, detail),
            Err(e) => check(name, false, format!("error: {e}")),
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    SelftestReport { checks, pass }
}

fn transform_round_trip(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 4, 1.0, None)?;
    let v = SpectralField::random(&g, seed, 0.0);
    let err = to_spectral(&to_physical(&v))?.sub(&v).norm();
    Ok((err <= 1e-13, format!("|T^-1 T v - v| = {err:.3e}")))
}

fn projector(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 5, 1.0, None)?;
    let v = SpectralField::random(&g, seed, 0.0);
    let p = project(&v);
    let idem = project(&p).sub(&p).norm();
    let res = constraint_residual(&p);
    let contr = p.norm() <= v.norm();
    let pass = idem <= 1e-14 && res <= 1e-13 * v.norm() && contr;
    Ok((pass, format!("idempotency {idem:.3e}, residual {res:.3e}")))
}

fn vertical_velocity(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 5, 1.0, None)?;
    let v = project(&SpectralField::random(&g, seed, 0.0));
    let w = compute_w(&v);
    let top = w.max_abs_at(0.0);
    let bottom = w.max_abs_at(-g.h());
    Ok((top <= 1e-13 && bottom <= 1e-12, format!("|w(0)| = {top:.3e}, |w(-h)| = {bottom:.3e}")))
}

fn skew_symmetry(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 6, 1.0, None)?;
    let mut worst = 0.0f64;
    for i in 0..5 {
        let v = project(&SpectralField::random(&g, seed + i, 0.5));
        let r = nonlinear_term(&v).inner(&v).abs() / (v.norm() * v.norm_grad_sq());
        worst = worst.max(r);
    }
    Ok((worst <= 1e-12, format!("max |(N(v),v)|/(|v||grad v|^2) = {worst:.3e}")))
}

fn duality(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 4, 1.0, None)?;
    let mut worst = 0.0f64;
    for i in 0..5 {
        let v = project(&SpectralField::random(&g, seed + 2 * i, 0.5));
        let phi = SpectralField::random(&g, seed + 2 * i + 1, 0.5);
        let lhs = advect(&v, &phi, AdvectionTerms::Full)?.inner(&v);
        let rhs = -advect(&v, &v, AdvectionTerms::Full)?.inner(&phi);
        let scale = v.norm() * v.norm_grad_sq().sqrt() * phi.norm_grad_sq().sqrt();
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok((worst <= 1e-12, format!("max relative defect {worst:.3e}")))
}

fn poincare_ratio(_: u64) -> Result<(bool, String)> {
    let g = make_grid(4, 4, 6, 1.0, None)?;
    let mut worst = 0.0f64;
    for k in 0..6 {
        let mut v = SpectralField::zeros(&g);
        v.set_mode(0, 1, k, X, Complex64::new(1.0, 0.5));
        let c = poincare_check(&v, 1.0);
        worst = worst.max((c.lhs / c.rhs - 2.0 / ((2 * k + 1) as f64 * PI)).abs());
    }
    Ok((worst <= 1e-14, format!("max ratio error {worst:.3e}")))
}

fn energy_identity(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(8, 8, 4, 1.0, None)?;
    let fs = ForcingSpec::preset("channel", 1.0, 1.0)?;
    let v0 = project(&SpectralField::random(&g, seed, 3.0)).scaled(0.5);
    let mut res = [0.0; 2];
    for (i, dt) in [4e-3, 2e-3].into_iter().enumerate() {
        let (_, ledger, _) = integrate(&v0, 0.0, 0.2, dt, &fs, 1)?;
        res[i] = energy_balance_residual(&ledger);
    }
    let order = (res[0] / res[1]).log2();
    Ok((order > 1.7 && order < 2.3, format!("residuals {:.3e}, {:.3e}, order {order:.2}", res[0], res[1])))
}

fn linear_decay(_: u64) -> Result<(bool, String)> {
    let g = make_grid(4, 4, 3, 1.0, None)?;
    let mut a = SpectralField::zeros(&g);
    a.set_mode(0, 0, 0, X, Complex64::new(1.0, 0.0));
    let dt = 1e-2;
    let sa = poincare_map(&a, 0.5, dt, &ForcingSpec::zero(Some(0.5)))?;
    let l = g.lambda(0, 0, 0);
    let cn = ((1.0 - 0.5 * dt * l) / (1.0 + 0.5 * dt * l)).powi(50);
    let err = (sa.norm() - cn).abs();
    Ok((err <= 1e-14, format!("|S(a)| - CN factor = {err:.3e}")))
}

fn ball_radius_closed_form(_: u64) -> Result<(bool, String)> {
    let g = make_grid(4, 4, 2, 1.0, None)?;
    let fs = ForcingSpec::preset("constant_norm", 1.0, 2.0)?;
    let f = CompiledForcing::new(&fs, &g)?.norm(0.0);
    let r = ball_radius(&fs, 1.0, &g)?;
    let err = (r - f).abs() / f;
    Ok((err <= 1e-10, format!("R/(h^2 F) - 1 = {err:.3e}")))
}

fn checkpoint_round_trip(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(6, 6, 3, 1.0, None)?;
    let s = State::new(project(&SpectralField::random(&g, seed, 0.0)), 0.25);
    let back = checkpoint::decode(&checkpoint::encode(&s), None)?;
    let exact = back.t.to_bits() == s.t.to_bits()
        && back
            .v
            .as_slice()
            .iter()
            .zip(s.v.as_slice())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    Ok((exact, "bit-exact".into()))
}

fn picard_unforced(seed: u64) -> Result<(bool, String)> {
    let g = make_grid(4, 4, 3, 1.0, None)?;
    let a0 = project(&SpectralField::random(&g, seed, 1.0));
    let r = picard_solve(&a0, 0.5, 1e-2, &ForcingSpec::zero(Some(0.5)), 1e-10, 100)?;
    let pass = r.a_star.norm() <= 1e-9 && r.orbit_verified;
    Ok((pass, format!("{} iterations, |a*| = {:.3e}", r.iterations, r.a_star.norm())))
}

fn steady_unforced(_: u64) -> Result<(bool, String)> {
    let g = make_grid(4, 4, 3, 1.0, None)?;
    let opts = SteadyOptions {
        check_period: 0.1,
        check_dt: 1e-2,
        ..SteadyOptions::default()
    };
    let r = steady_solve_with(&ForcingSpec::zero(None), &g, &opts)?;
    Ok((r.v.norm() == 0.0 && r.residual == 0.0, format!("|v_s| = {:.3e}", r.v.norm())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        let r = run_selftest(1);
        for c in &r.checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert!(r.pass);
    }
}
