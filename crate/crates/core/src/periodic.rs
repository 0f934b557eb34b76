//! Time-periodic and steady solutions: the period map S, its fixed points by
//! Picard iteration and Newton–Krylov shooting, the invariant-ball radius and
//! the steady-state solver.

use std::sync::Arc;

use serde::Serialize;

use crate::constraint::{apply_stokes, pressure_of_residual, project, stokes_solve, PressureField};
use crate::diagnostics::{periodic_dissipation_check, slack_factor, slack_scale, DissipationCheck};
use crate::dynamics::{advect, nonlinear_term, AdvectionTerms};
use crate::error::{HpeError, Result};
use crate::field::SpectralField;
use crate::forcing::{CompiledForcing, ForcingSpec};
use crate::grid::Grid;
use crate::integrator::{constrained_start, fit_steps, EnergyLedger, Integrator, IntegratorOptions, State};
use crate::krylov::gmres;
use crate::quadrature::integrate_adaptive;

/// The period map a ↦ v(T; a) at a fixed step.
pub struct PoincareMap {
    integ: Integrator,
    period: f64,
    steps: usize,
    warnings: Vec<String>,
}

impl PoincareMap {
    /// `dt` is shortened when it does not divide `period`.
    pub fn new(grid: &Arc<Grid>, fs: &ForcingSpec, period: f64, dt: f64, nonlinear: bool) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(HpeError::validation("time.T", format!("period must be positive, got {period}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(HpeError::validation("time.dt", format!("dt must be positive, got {dt}")));
        }
        fs.validate()?;
        if let Some(p) = fs.period() {
            let ratio = period / p;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(HpeError::IncompatibleProblem(format!(
                    "forcing period {p} does not divide the shooting period {period}"
                )));
            }
        }
        let (steps, dt_eff) = fit_steps(period, dt);
        let mut warnings = Vec::new();
        if dt_eff != dt {
            let msg = format!("dt adjusted from {dt:e} to {dt_eff:e} so that T/dt = {steps}");
            log::info!("{msg}");
            warnings.push(msg);
        }
        let opts = IntegratorOptions {
            nonlinear,
            cfl: 0.0,
            snapshots: false,
            monitors: true,
            l4_monitor: false,
        };
        let integ = Integrator::new(grid, fs, dt_eff, opts)?;
        warnings.extend(integ.forcing().truncated.iter().cloned());
        Ok(PoincareMap {
            integ,
            period,
            steps,
            warnings,
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dt(&self) -> f64 {
        self.integ.dt()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.integ.grid()
    }

    pub fn forcing(&self) -> &CompiledForcing {
        self.integ.forcing()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// S(a). The start time is 0, so the map is the same at every call.
    pub fn apply(&self, a: &SpectralField) -> Result<SpectralField> {
        if !Arc::ptr_eq(a.grid(), self.grid()) && !a.grid().same_space(self.grid()) {
            return Err(HpeError::GridMismatch);
        }
        let mut s = State::new(a.clone(), 0.0);
        self.integ.run(&mut s, self.steps, self.steps, None, None)?;
        Ok(s.v)
    }

    /// One period from `a` with a ledger row every `sample_every` steps.
    pub fn orbit(&self, a: &SpectralField, sample_every: usize) -> Result<(State, EnergyLedger)> {
        let mut s = State::new(a.clone(), 0.0);
        let mut ledger = EnergyLedger::default();
        self.integ.run(&mut s, self.steps, sample_every, Some(&mut ledger), None)?;
        Ok((s, ledger))
    }
}

/// v(T) from initial data `a` (projected first if it violates the constraint).
pub fn poincare_map(a: &SpectralField, period: f64, dt: f64, fs: &ForcingSpec) -> Result<SpectralField> {
    let map = PoincareMap::new(a.grid(), fs, period, dt, true)?;
    let mut warnings = Vec::new();
    map.apply(&constrained_start(a, &mut warnings))
}

/// Radius of the ball mapped into itself by S:
/// `R = 2 ∫₀ᵀ e^{2(τ−T)/h²} ‖f(τ)‖₂ dτ / (1 − e^{−2T/h²})`.
pub fn ball_radius(fs: &ForcingSpec, period: f64, grid: &Arc<Grid>) -> Result<f64> {
    if !(period.is_finite() && period > 0.0) {
        return Err(HpeError::validation("time.T", format!("period must be positive, got {period}")));
    }
    let cf = CompiledForcing::new(fs, grid)?;
    Ok(ball_radius_compiled(&cf, period, grid.h()))
}

pub fn ball_radius_compiled(forcing: &CompiledForcing, period: f64, h: f64) -> f64 {
    if forcing.is_zero() {
        return 0.0;
    }
    let h2 = h * h;
    let scale = forcing.norm(0.0).max(forcing.norm(0.25 * period)).max(1e-300);
    let integral = integrate_adaptive(
        |tau| (2.0 * (tau - period) / h2).exp() * forcing.norm(tau),
        0.0,
        period,
        1e-15 * scale * period,
    );
    2.0 * integral / -(-2.0 * period / h2).exp_m1()
}

/// One boundary sample of the ball certificate.
#[derive(Clone, Debug, Serialize)]
pub struct BallSample {
    pub seed: u64,
    pub norm_in: f64,
    pub norm_out: f64,
    pub pass: bool,
}

/// Result of checking ‖S(a)‖₂ ≤ R·slack on random boundary points.
#[derive(Clone, Debug, Serialize)]
pub struct BallCertificate {
    pub radius: f64,
    pub slack: f64,
    pub certified: bool,
    /// max ‖S(a)‖₂ / (R·slack); below 1 when certified.
    pub worst_ratio: f64,
    pub samples: Vec<BallSample>,
    /// The failing initial data.
    #[serde(skip)]
    pub failures: Vec<SpectralField>,
}

/// Integrate from `samples` random constrained fields with ‖a‖₂ = R.
pub fn certify_ball(
    fs: &ForcingSpec,
    period: f64,
    dt: f64,
    radius: f64,
    samples: usize,
    grid: &Arc<Grid>,
    seed: u64,
) -> Result<BallCertificate> {
    let map = PoincareMap::new(grid, fs, period, dt, true)?;
    certify_ball_with(&map, radius, samples, seed)
}

pub fn certify_ball_with(map: &PoincareMap, radius: f64, samples: usize, seed: u64) -> Result<BallCertificate> {
    let grid = map.grid().clone();
    let slack = slack_factor(map.dt(), slack_scale(map.forcing(), grid.h()));
    let bound = radius * slack;
    let mut out = Vec::with_capacity(samples);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..samples {
        let s = seed.wrapping_add(i as u64);
        let mut a = project(&SpectralField::random(&grid, s, 1.0));
        let nrm = a.norm();
        if nrm > 0.0 {
            a.scale(radius / nrm);
        }
        // a sample the scheme cannot carry through one period fails the certificate
        let norm_out = match map.apply(&a) {
            Ok(sa) => sa.norm(),
            Err(HpeError::BlowUp { t, .. }) => {
                log::warn!("ball sample {i} (seed {s}) blew up at t = {t:e}; try a smaller dt");
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        let pass = norm_out <= bound;
        let ratio = if bound > 0.0 {
            norm_out / bound
        } else if norm_out == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(ratio);
        if !pass {
            log::warn!("ball sample {i} (seed {s}) leaves the ball: |S(a)| = {norm_out:e} > {bound:e}");
            failures.push(a.clone());
        }
        out.push(BallSample {
            seed: s,
            norm_in: a.norm(),
            norm_out,
            pass,
        });
    }
    Ok(BallCertificate {
        radius,
        slack,
        certified: failures.is_empty(),
        worst_ratio: worst,
        samples: out,
        failures,
    })
}

/// Settings shared by the shooting solvers.
#[derive(Clone, Copy, Debug)]
pub struct ShootOptions {
    pub tol: f64,
    pub maxit: usize,
    pub krylov_dim: usize,
    /// Multiplier of √eps in the directional-difference step.
    pub jvp_eps: f64,
    /// Ledger sampling stride for the verified orbit.
    pub sample_every: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            tol: 1e-9,
            maxit: 200,
            krylov_dim: 20,
            jvp_eps: 1.0,
            sample_every: 1,
        }
    }
}

/// A converged periodic orbit.
#[derive(Clone, Debug)]
pub struct ShootResult {
    pub method: &'static str,
    pub a_star: SpectralField,
    /// ‖S(a) − a‖₂ at every iterate, starting with a0.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub ball_radius: f64,
    /// ‖a*‖₂ ≤ R·slack: the orbit passes through the invariant ball.
    pub ball_certified: bool,
    /// One period from a*.
    pub orbit_ledger: EnergyLedger,
    /// ‖v(2T) − v(T)‖₂ on re-integration from a*.
    pub orbit_defect: f64,
    pub orbit_verified: bool,
    pub dissipation: DissipationCheck,
    pub dt: f64,
    pub steps_per_period: usize,
    pub map_evaluations: usize,
    pub warnings: Vec<String>,
}

/// JSON record of a shooting run.
#[derive(Clone, Debug, Serialize)]
pub struct ShootSummary {
    pub method: &'static str,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub residuals: Vec<f64>,
    pub ball_radius: f64,
    pub ball_certified: bool,
    pub orbit_defect: f64,
    pub orbit_verified: bool,
    pub dissipation: DissipationCheck,
    pub norm_a_star: f64,
    /// Min, mean and max of ‖v‖₂² over the orbit, to tell distinct orbits apart.
    pub energy_signature: [f64; 3],
    pub dt: f64,
    pub steps_per_period: usize,
    pub map_evaluations: usize,
    pub warnings: Vec<String>,
}

impl ShootResult {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }

    pub fn summary(&self) -> ShootSummary {
        let e: Vec<f64> = self.orbit_ledger.rows.iter().map(|r| r.e).collect();
        let signature = if e.is_empty() {
            [f64::NAN; 3]
        } else {
            let mn = e.iter().cloned().fold(f64::INFINITY, f64::min);
            let mx = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            [mn, e.iter().sum::<f64>() / e.len() as f64, mx]
        };
        ShootSummary {
            method: self.method,
            converged: true,
            iterations: self.iterations,
            final_residual: self.final_residual(),
            residuals: self.residuals.clone(),
            ball_radius: self.ball_radius,
            ball_certified: self.ball_certified,
            orbit_defect: self.orbit_defect,
            orbit_verified: self.orbit_verified,
            dissipation: self.dissipation.clone(),
            norm_a_star: self.a_star.norm(),
            energy_signature: signature,
            dt: self.dt,
            steps_per_period: self.steps_per_period,
            map_evaluations: self.map_evaluations,
            warnings: self.warnings.clone(),
        }
    }
}

/// Fixed point of S by Picard iteration a ← S(a).
pub fn picard_solve(
    a0: &SpectralField,
    period: f64,
    dt: f64,
    fs: &ForcingSpec,
    tol: f64,
    maxit: usize,
) -> Result<ShootResult> {
    let map = PoincareMap::new(a0.grid(), fs, period, dt, true)?;
    let opts = ShootOptions {
        tol,
        maxit,
        ..ShootOptions::default()
    };
    picard_with(&map, a0, &opts)
}

pub fn picard_with(map: &PoincareMap, a0: &SpectralField, opts: &ShootOptions) -> Result<ShootResult> {
    check_tol(opts.tol)?;
    let mut warnings = map.warnings().to_vec();
    let mut a = constrained_start(a0, &mut warnings);
    let mut residuals = Vec::new();
    let mut evals = 0;
    let mut it = 0;
    loop {
        let sa = map.apply(&a)?;
        evals += 1;
        let r = sa.sub(&a).norm();
        residuals.push(r);
        log::debug!("picard {it}: residual {r:e}");
        if r <= opts.tol {
            return finish("picard", map, a, residuals, it, evals, warnings, opts);
        }
        if it >= opts.maxit || !r.is_finite() {
            return Err(HpeError::NoConvergence {
                method: "picard",
                iterations: it,
                last: r,
                residuals,
            });
        }
        a = sa;
        it += 1;
    }
}

/// Fixed point of S by inexact Newton on S(a) − a with GMRES inner solves
/// and directional-difference Jacobian products.
#[allow(clippy::too_many_arguments)]
pub fn newton_shoot(
    a0: &SpectralField,
    period: f64,
    dt: f64,
    fs: &ForcingSpec,
    tol: f64,
    maxit: usize,
    krylov_dim: usize,
) -> Result<ShootResult> {
    let map = PoincareMap::new(a0.grid(), fs, period, dt, true)?;
    let opts = ShootOptions {
        tol,
        maxit,
        krylov_dim,
        ..ShootOptions::default()
    };
    newton_with(&map, a0, &opts)
}

pub fn newton_with(map: &PoincareMap, a0: &SpectralField, opts: &ShootOptions) -> Result<ShootResult> {
    check_tol(opts.tol)?;
    let mut warnings = map.warnings().to_vec();
    let mut a = constrained_start(a0, &mut warnings);
    let mut evals = 0usize;
    let mut sa = map.apply(&a)?;
    evals += 1;
    let mut res = sa.sub(&a);
    let mut rnorm = res.norm();
    let mut residuals = vec![rnorm];
    let step = opts.jvp_eps * f64::EPSILON.sqrt();
    let mut it = 0;
    while rnorm > opts.tol {
        if it >= opts.maxit || !rnorm.is_finite() {
            return Err(HpeError::NoConvergence {
                method: "newton",
                iterations: it,
                last: rnorm,
                residuals,
            });
        }
        // J q = (S(a + εq) − S(a))/ε − q
        let anorm = a.norm();
        let mut jvp_evals = 0usize;
        let apply = |q: &SpectralField| -> Result<SpectralField> {
            let qn = q.norm();
            if qn == 0.0 {
                return Ok(SpectralField::zeros(q.grid()));
            }
            let eps = step * (1.0 + anorm) / qn;
            let mut ap = a.clone();
            ap.axpy(eps, q);
            let mut out = map.apply(&ap)?;
            jvp_evals += 1;
            out.axpy(-1.0, &sa);
            out.scale(1.0 / eps);
            out.axpy(-1.0, q);
            Ok(out)
        };
        let rhs = res.scaled(-1.0);
        let eta = (0.1 * rnorm.min(1.0)).clamp(1e-8, 1e-1);
        let inner = gmres(apply, |v| v.clone(), &rhs, eta, opts.krylov_dim, 4 * opts.krylov_dim)?;
        evals += jvp_evals;
        if !inner.converged {
            let msg = format!(
                "newton {it}: inner solver stagnated at relative residual {:.3e}; the Jacobian may be singular",
                inner.residual
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        // halve the step while the residual grows
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let mut trial = a.clone();
            trial.axpy(lambda, &inner.x);
            let st = map.apply(&trial)?;
            evals += 1;
            let rt = st.sub(&trial);
            let tn = rt.norm();
            if tn.is_finite() && tn < rnorm {
                accepted = Some((trial, st, rt, tn));
                break;
            }
            lambda *= 0.5;
        }
        let Some((na, nsa, nres, nn)) = accepted else {
            return Err(HpeError::NoConvergence {
                method: "newton",
                iterations: it,
                last: rnorm,
                residuals,
            });
        };
        log::debug!("newton {it}: residual {nn:e} (step {lambda}, {} inner)", inner.iterations);
        a = na;
        sa = nsa;
        res = nres;
        rnorm = nn;
        residuals.push(rnorm);
        it += 1;
    }
    finish("newton", map, a, residuals, it, evals, warnings, opts)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(HpeError::validation("solver.tol", format!("tolerance must be positive, got {tol}")))
    }
}

/// Re-integrate over [0, 2T] from a*, record the one-period ledger and run
/// the orbit checks.
#[allow(clippy::too_many_arguments)]
fn finish(
    method: &'static str,
    map: &PoincareMap,
    a_star: SpectralField,
    residuals: Vec<f64>,
    iterations: usize,
    mut evals: usize,
    mut warnings: Vec<String>,
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let (one, mut orbit_ledger) = map.orbit(&a_star, opts.sample_every)?;
    let two = map.apply(&one.v)?;
    evals += 2;
    let orbit_defect = two.sub(&one.v).norm();
    let orbit_verified = orbit_defect <= 2.0 * opts.tol;
    if !orbit_verified {
        let msg = format!("orbit check failed: |v(2T) - v(T)| = {orbit_defect:e} > {:e}", 2.0 * opts.tol);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let h = map.grid().h();
    let dissipation = periodic_dissipation_check(&orbit_ledger, map.forcing(), h);
    let ball_radius = ball_radius_compiled(map.forcing(), map.period(), h);
    let slack = slack_factor(map.dt(), slack_scale(map.forcing(), h));
    let ball_certified = a_star.norm() <= ball_radius * slack;
    orbit_ledger.warnings.extend(warnings.iter().cloned());
    Ok(ShootResult {
        method,
        a_star,
        residuals,
        iterations,
        ball_radius,
        ball_certified,
        orbit_ledger,
        orbit_defect,
        orbit_verified,
        dissipation,
        dt: map.dt(),
        steps_per_period: map.steps(),
        map_evaluations: evals,
        warnings,
    })
}

/// Settings of the steady solver.
#[derive(Clone, Copy, Debug)]
pub struct SteadyOptions {
    pub tol: f64,
    pub pseudo_dt: f64,
    pub max_pseudo_steps: usize,
    pub newton_maxit: usize,
    pub krylov_dim: usize,
    /// Period of the fixed-point cross-check (0 skips it).
    pub check_period: f64,
    pub check_dt: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            tol: 1e-10,
            pseudo_dt: 5e-3,
            max_pseudo_steps: 4000,
            newton_maxit: 40,
            krylov_dim: 40,
            check_period: 1.0,
            check_dt: 1e-3,
        }
    }
}

/// A steady state with its pressure and convergence record.
#[derive(Clone, Debug)]
pub struct SteadyResult {
    pub v: SpectralField,
    pub pressure: PressureField,
    /// ‖P(f − N(v) − A v)‖₂
    pub residual: f64,
    /// Residual after the pseudo-time phase and after each Newton step.
    pub residuals: Vec<f64>,
    pub pseudo_steps: usize,
    pub newton_iterations: usize,
    /// ‖S(v) − v‖₂ over the check period, when run.
    pub fixed_point_defect: Option<f64>,
    pub warnings: Vec<String>,
}

/// JSON record of a steady solve.
#[derive(Clone, Debug, Serialize)]
pub struct SteadySummary {
    pub residual: f64,
    pub residuals: Vec<f64>,
    pub pseudo_steps: usize,
    pub newton_iterations: usize,
    pub fixed_point_defect: Option<f64>,
    pub norm_v: f64,
    pub norm_grad_v_sq: f64,
    pub norm_grad_p_sq: f64,
    pub warnings: Vec<String>,
}

impl SteadyResult {
    pub fn summary(&self) -> SteadySummary {
        SteadySummary {
            residual: self.residual,
            residuals: self.residuals.clone(),
            pseudo_steps: self.pseudo_steps,
            newton_iterations: self.newton_iterations,
            fixed_point_defect: self.fixed_point_defect,
            norm_v: self.v.norm(),
            norm_grad_v_sq: self.v.norm_grad_sq(),
            norm_grad_p_sq: self.pressure.norm_grad_sq(),
            warnings: self.warnings.clone(),
        }
    }
}

/// f − N(v) − A v (unprojected).
fn steady_defect(v: &SpectralField, f: &SpectralField) -> SpectralField {
    let mut r = f.sub(&nonlinear_term(v));
    r.axpy(-1.0, &apply_stokes(v));
    r
}

pub fn steady_residual(v: &SpectralField, f: &SpectralField) -> f64 {
    project(&steady_defect(v, f)).norm()
}

/// Steady state for a time-independent forcing.
pub fn steady_solve(fs: &ForcingSpec, grid: &Arc<Grid>, tol: f64) -> Result<SteadyResult> {
    steady_solve_with(
        fs,
        grid,
        &SteadyOptions {
            tol,
            ..SteadyOptions::default()
        },
    )
}

pub fn steady_solve_with(fs: &ForcingSpec, grid: &Arc<Grid>, opts: &SteadyOptions) -> Result<SteadyResult> {
    check_tol(opts.tol)?;
    fs.validate()?;
    if !fs.steady && !fs.modes.is_empty() {
        return Err(HpeError::validation("forcing.steady", "the steady solver needs a steady forcing"));
    }
    let cf = CompiledForcing::new(fs, grid)?;
    let mut warnings = cf.truncated.clone();
    let f = cf.eval(0.0);
    // Stokes solution as the starting guess
    let (mut v, _) = stokes_solve(&f);
    let mut r = steady_residual(&v, &f);
    let mut residuals = Vec::new();
    let mut pseudo_steps = 0;
    let switch = 1e-4 * (1.0 + r);
    if r > opts.tol && r > switch && opts.nonlinear_pseudo() {
        let popts = IntegratorOptions {
            nonlinear: true,
            cfl: 0.0,
            snapshots: false,
            monitors: false,
            l4_monitor: false,
        };
        let integ = Integrator::new(grid, fs, opts.pseudo_dt, popts)?;
        let mut s = State::new(v.clone(), 0.0);
        const CHECK: usize = 50;
        while pseudo_steps < opts.max_pseudo_steps {
            integ.run(&mut s, CHECK, CHECK, None, None)?;
            pseudo_steps += CHECK;
            let rs = steady_residual(&s.v, &f);
            if rs <= switch {
                break;
            }
        }
        let rs = steady_residual(&s.v, &f);
        if rs < r {
            v = s.v;
            r = rs;
        }
    }
    residuals.push(r);
    let mut it = 0;
    while r > opts.tol {
        if it >= opts.newton_maxit || !r.is_finite() {
            return Err(HpeError::NoConvergence {
                method: "steady",
                iterations: it,
                last: r,
                residuals,
            });
        }
        let rhs = project(&steady_defect(&v, &f));
        // J δ = P(DN(v)δ + Aδ) with the Stokes solve as right preconditioner
        let vv = v.clone();
        let apply = |d: &SpectralField| -> Result<SpectralField> {
            let mut out = advect(&vv, d, AdvectionTerms::Full)?;
            out.axpy(1.0, &advect(d, &vv, AdvectionTerms::Full)?);
            out.axpy(1.0, &apply_stokes(d));
            Ok(project(&out))
        };
        let eta = (1e-3 * r.min(1.0)).max(1e-8);
        let inner = gmres(apply, |x| stokes_solve(x).0, &rhs, eta, opts.krylov_dim, 10 * opts.krylov_dim)?;
        if !inner.converged {
            let msg = format!("steady newton {it}: inner solve stalled at {:.3e}", inner.residual);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let mut trial = v.clone();
            trial.axpy(lambda, &inner.x);
            let rt = steady_residual(&trial, &f);
            if rt < r {
                accepted = Some((trial, rt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((nv, nr)) = accepted else {
            return Err(HpeError::NoConvergence {
                method: "steady",
                iterations: it,
                last: r,
                residuals,
            });
        };
        log::debug!("steady newton {it}: residual {nr:e} (step {lambda})");
        v = nv;
        r = nr;
        residuals.push(r);
        it += 1;
    }
    let pressure = pressure_of_residual(&steady_defect(&v, &f));
    let fixed_point_defect = if opts.check_period > 0.0 {
        let map = PoincareMap::new(grid, fs, opts.check_period, opts.check_dt, true)?;
        Some(map.apply(&v)?.sub(&v).norm())
    } else {
        None
    };
    Ok(SteadyResult {
        v,
        pressure,
        residual: r,
        residuals,
        pseudo_steps,
        newton_iterations: it,
        fixed_point_defect,
        warnings,
    })
}

impl SteadyOptions {
    fn nonlinear_pseudo(&self) -> bool {
        self.max_pseudo_steps > 0 && self.pseudo_dt > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::X;
    use crate::grid::make_grid;
    use num_complex::Complex64;

    #[test]
    fn zero_forcing_has_zero_radius_and_fixed_point() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let fs = ForcingSpec::preset("none", 1.0, 0.0).unwrap();
        assert_eq!(ball_radius(&fs, 1.0, &g).unwrap(), 0.0);
        let s0 = poincare_map(&SpectralField::zeros(&g), 1.0, 1e-2, &fs).unwrap();
        assert_eq!(s0.norm(), 0.0);
    }

    #[test]
    fn constant_norm_radius_is_h2_f() {
        let g = make_grid(4, 4, 3, 0.7, None).unwrap();
        let fs = ForcingSpec::preset("constant_norm", 1.0, 3.0).unwrap();
        let cf = CompiledForcing::new(&fs, &g).unwrap();
        let f = cf.norm(0.0);
        assert!((cf.norm(0.37) - f).abs() < 1e-13 * f);
        let r = ball_radius(&fs, 1.0, &g).unwrap();
        assert!((r - 0.49 * f).abs() < 1e-12 * r, "{r} vs {}", 0.49 * f);
    }

    #[test]
    fn single_mode_decays_at_its_rate() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let mut a = SpectralField::zeros(&g);
        a.set_mode(0, 1, 1, X, Complex64::new(0.3, 0.1));
        let fs = ForcingSpec::zero(Some(1.0));
        let dt = 1e-3;
        let sa = poincare_map(&a, 1.0, dt, &fs).unwrap();
        let l = g.lambda(0, 1, 1);
        // Crank–Nicolson amplification, exact for a single linear mode
        let cn = ((1.0 - 0.5 * dt * l) / (1.0 + 0.5 * dt * l)).powi(1000);
        let exact = (-l).exp();
        assert!((sa.norm() / a.norm() - cn).abs() < 1e-12);
        assert!((cn / exact - 1.0).abs() < dt * dt * l.powi(3) / 12.0 * 1.01);
    }

    #[test]
    fn picard_from_zero_forcing_goes_to_zero() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let fs = ForcingSpec::zero(Some(0.5));
        let a0 = project(&SpectralField::random(&g, 1, 1.0));
        let res = picard_solve(&a0, 0.5, 1e-2, &fs, 1e-10, 100).unwrap();
        assert!(res.a_star.norm() < 1e-9);
        assert!(res.orbit_verified);
        assert!(res.residuals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn blown_up_ball_samples_fail_the_certificate() {
        let g = make_grid(8, 8, 4, 1.0, None).unwrap();
        let fs = ForcingSpec::preset("channel", 1.0, 1.0).unwrap();
        let map = PoincareMap::new(&g, &fs, 1.0, 0.05, true).unwrap();
        let cert = certify_ball_with(&map, 1e6, 2, 3).unwrap();
        assert!(!cert.certified);
        assert!(cert.samples.iter().all(|s| !s.pass && s.norm_out.is_infinite()));
        assert_eq!(cert.failures.len(), 2);
    }

    #[test]
    fn incompatible_period_is_rejected() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let fs = ForcingSpec::preset("channel", 0.7, 1.0).unwrap();
        assert!(matches!(
            PoincareMap::new(&g, &fs, 1.0, 1e-2, true),
            Err(HpeError::IncompatibleProblem(_))
        ));
    }

    #[test]
    fn steady_solve_with_zero_forcing() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let fs = ForcingSpec::zero(None);
        let opts = SteadyOptions {
            check_period: 0.1,
            check_dt: 1e-2,
            ..SteadyOptions::default()
        };
        let out = steady_solve_with(&fs, &g, &opts).unwrap();
        assert_eq!(out.v.norm(), 0.0);
        assert_eq!(out.pressure.norm_grad_sq(), 0.0);
        assert_eq!(out.fixed_point_defect, Some(0.0));
    }
}
