//! IMEX time stepping: Crank–Nicolson diffusion with the constraint solved
//! exactly per wavevector, Heun predictor–corrector for advection and forcing.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::constraint::{constraint_residual, pressure_from_multiplier, project, ConstraintData, PressureField};
use crate::diagnostics::SplitSampler;
use crate::dynamics::nonlinear_term;
use crate::error::{HpeError, Result};
use crate::forcing::{CompiledForcing, ForcingSpec};
use crate::grid::Grid;
use crate::transform::to_physical;
use crate::SpectralField;

/// Coefficients above this magnitude count as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e100;

/// Solver state. The pressure is the diagnostic multiplier of the last step.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: SpectralField,
    pub pressure: PressureField,
}

impl State {
    pub fn new(v: SpectralField, t: f64) -> Self {
        let pressure = PressureField::zeros(v.grid());
        State { t, v, pressure }
    }
}

/// One sampled row of the energy ledger.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LedgerRow {
    pub t: f64,
    /// ‖v‖₂²
    pub e: f64,
    /// ‖∇v‖₂²
    pub d: f64,
    /// (f, v)
    pub w: f64,
    /// ∫₀ᵗ ‖∇v‖₂² by the midpoint rule of the scheme
    pub cum_d: f64,
    /// ∫₀ᵗ (f, v) likewise
    pub cum_w: f64,
    pub norm_dz_v: f64,
    pub norm_grad_h_vbar: f64,
    /// NaN when the L⁴ monitor is disabled.
    pub norm_vtilde_l4: f64,
    pub norm_vbar_h1: f64,
    pub norm_f: f64,
    pub norm_grad_h_p_sq: f64,
}

/// Sampled energy budget of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub dt: f64,
    pub rows: Vec<LedgerRow>,
    pub warnings: Vec<String>,
}

/// Optional field snapshots at the ledger sample times.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<SpectralField>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    /// Include the advection term (switch off for linear-response checks).
    pub nonlinear: bool,
    /// Advisory CFL number; 0 disables the check.
    pub cfl: f64,
    /// Keep field snapshots in the trajectory.
    pub snapshots: bool,
    /// Evaluate the per-row monitor norms.
    pub monitors: bool,
    /// Evaluate ‖ṽ‖₄ on each row (needs physical-space quadrature).
    pub l4_monitor: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            nonlinear: true,
            cfl: 0.5,
            snapshots: false,
            monitors: true,
            l4_monitor: false,
        }
    }
}

/// Energy exchanged during one step, at the step midpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub d_half: f64,
    pub w_half: f64,
}

/// A fixed-dt stepper bound to one grid and forcing.
pub struct Integrator {
    grid: Arc<Grid>,
    forcing: CompiledForcing,
    dt: f64,
    opts: IntegratorOptions,
    /// 1 + dt λ/2 per (im, in, k)
    implicit: Vec<f64>,
    /// 1 − dt λ/2 per (im, in, k)
    explicit: Vec<f64>,
    /// Σ cbar²/d per (im, in)
    border: Vec<f64>,
    cbar: Vec<f64>,
    sampler: Option<SplitSampler>,
    cfl_warned: AtomicBool,
}

impl Integrator {
    pub fn new(grid: &Arc<Grid>, fs: &ForcingSpec, dt: f64, opts: IntegratorOptions) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(HpeError::validation("time.dt", format!("dt must be positive, got {dt}")));
        }
        let forcing = CompiledForcing::new(fs, grid)?;
        Self::with_compiled(grid, forcing, dt, opts)
    }

    pub fn with_compiled(grid: &Arc<Grid>, forcing: CompiledForcing, dt: f64, opts: IntegratorOptions) -> Result<Self> {
        let g = grid.clone();
        let cd = ConstraintData::new(&g);
        let (mm, nn, kk) = (g.m(), g.n(), g.k());
        let mut implicit = vec![1.0; mm * nn * kk];
        let mut explicit = vec![1.0; mm * nn * kk];
        let mut border = vec![0.0; mm * nn];
        for im in 0..mm {
            let m = g.wavenumber_m(im);
            for in_ in 0..nn {
                let n = g.wavenumber_n(in_);
                let mut s = 0.0;
                for k in 0..kk {
                    let l = g.lambda(m, n, k);
                    let d = 1.0 + 0.5 * dt * l;
                    implicit[(im * nn + in_) * kk + k] = d;
                    explicit[(im * nn + in_) * kk + k] = 1.0 - 0.5 * dt * l;
                    s += cd.cbar[k] * cd.cbar[k] / d;
                }
                if s <= f64::MIN_POSITIVE {
                    return Err(HpeError::DegenerateConstraint(s));
                }
                border[im * nn + in_] = s;
            }
        }
        let sampler = if opts.monitors && opts.l4_monitor {
            Some(SplitSampler::new(&g))
        } else {
            None
        };
        Ok(Integrator {
            grid: g,
            forcing,
            dt,
            opts,
            implicit,
            explicit,
            border,
            cbar: cd.cbar,
            sampler,
            cfl_warned: AtomicBool::new(false),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn forcing(&self) -> &CompiledForcing {
        &self.forcing
    }

    pub fn options(&self) -> &IntegratorOptions {
        &self.opts
    }

    /// Explicit right-hand side −N(v) + f(t).
    fn explicit_rhs(&self, v: &SpectralField, t: f64) -> SpectralField {
        let mut f = self.forcing.eval(t);
        if self.opts.nonlinear {
            f.axpy(-1.0, &nonlinear_term(v));
        }
        f
    }

    /// Solve `d a + γ cbar ê = b` per wavevector; returns the multipliers
    /// through `gamma` when requested.
    fn implicit_solve(&self, b: &SpectralField, mut gamma: Option<&mut PressureField>) -> SpectralField {
        let g = &self.grid;
        let kk = g.k();
        let mut out = SpectralField::zeros(g);
        let src = b.as_slice();
        let dst = out.as_mut_slice();
        for (m, n) in g.wavevectors() {
            let (im, in_) = (g.im(m), g.in_(n));
            let base = g.idx(im, in_, 0, 0);
            let d = &self.implicit[(im * g.n() + in_) * kk..(im * g.n() + in_ + 1) * kk];
            match ConstraintData::direction(m, n) {
                None => {
                    for k in 0..kk {
                        dst[base + 2 * k] = src[base + 2 * k] / d[k];
                        dst[base + 2 * k + 1] = src[base + 2 * k + 1] / d[k];
                    }
                }
                Some((ex, ey)) => {
                    let mut num = Complex64::new(0.0, 0.0);
                    for k in 0..kk {
                        let par = src[base + 2 * k] * ex + src[base + 2 * k + 1] * ey;
                        num += par * (self.cbar[k] / d[k]);
                    }
                    let gam = num / self.border[im * g.n() + in_];
                    for k in 0..kk {
                        let c = gam * self.cbar[k];
                        dst[base + 2 * k] = (src[base + 2 * k] - c * ex) / d[k];
                        dst[base + 2 * k + 1] = (src[base + 2 * k + 1] - c * ey) / d[k];
                    }
                    if let Some(p) = gamma.as_deref_mut() {
                        let pi = pressure_from_multiplier(gam, m, n, g).unwrap_or_default() / self.dt;
                        p.set(m, n, pi);
                    }
                }
            }
        }
        out
    }

    /// (1 − dt A/2) v
    fn explicit_diffusion(&self, v: &SpectralField) -> SpectralField {
        let mut out = v.clone();
        for (i, a) in out.as_mut_slice().chunks_exact_mut(2).enumerate() {
            let e = self.explicit[i];
            a[0] *= e;
            a[1] *= e;
        }
        out
    }

    /// Advance one step in place.
    pub fn step(&self, s: &mut State) -> Result<StepRecord> {
        let dt = self.dt;
        let t0 = s.t;
        let t1 = t0 + dt;
        let base = self.explicit_diffusion(&s.v);
        let f0 = self.explicit_rhs(&s.v, t0);
        let mut rhs = base.clone();
        let mut pressure = PressureField::zeros(&self.grid);
        let v_new = if self.opts.nonlinear {
            rhs.axpy(dt, &f0);
            let v_star = self.implicit_solve(&rhs, None);
            check_finite(&v_star, t1)?;
            let f1 = self.explicit_rhs(&v_star, t1);
            let mut rhs = base;
            rhs.axpy(0.5 * dt, &f0);
            rhs.axpy(0.5 * dt, &f1);
            self.implicit_solve(&rhs, Some(&mut pressure))
        } else {
            let f1 = self.forcing.eval(t1);
            rhs.axpy(0.5 * dt, &f0);
            rhs.axpy(0.5 * dt, &f1);
            self.implicit_solve(&rhs, Some(&mut pressure))
        };
        check_finite(&v_new, t1)?;
        let mut mid = s.v.add(&v_new);
        mid.scale(0.5);
        let d_half = mid.norm_grad_sq();
        let w_half = self.forcing.eval(t0 + 0.5 * dt).inner(&mid);
        s.v = v_new;
        s.t = t1;
        s.pressure = pressure;
        Ok(StepRecord { d_half, w_half })
    }

    /// Ledger row for the current state.
    pub fn ledger_row(&self, s: &State, cum_d: f64, cum_w: f64) -> LedgerRow {
        let f = self.forcing.eval(s.t);
        let v = &s.v;
        let (dz, gh, l4, h1) = if self.opts.monitors {
            let vbar = v.vertical_average();
            let l4 = self.sampler.as_ref().map_or(f64::NAN, |sp| sp.vtilde_l4(v));
            (v.norm_dz_sq().sqrt(), vbar.norm_grad_sq().sqrt(), l4, vbar.norm_h1_sq().sqrt())
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        LedgerRow {
            t: s.t,
            e: v.norm_sq(),
            d: v.norm_grad_sq(),
            w: f.inner(v),
            cum_d,
            cum_w,
            norm_dz_v: dz,
            norm_grad_h_vbar: gh,
            norm_vtilde_l4: l4,
            norm_vbar_h1: h1,
            norm_f: f.norm(),
            norm_grad_h_p_sq: s.pressure.norm_grad_sq(),
        }
    }

    fn check_cfl(&self, v: &SpectralField) {
        if self.opts.cfl <= 0.0 || self.cfl_warned.load(Ordering::Relaxed) {
            return;
        }
        let umax = to_physical(v).max_abs();
        let dx = 1.0 / self.grid.m().max(self.grid.n()) as f64;
        if umax * self.dt > self.opts.cfl * dx {
            self.cfl_warned.store(true, Ordering::Relaxed);
            log::warn!(
                "advisory CFL exceeded at t = {:.6}: dt = {:e}, max|v| = {:.3e}, limit {:e}",
                self.dt,
                self.dt,
                umax,
                self.opts.cfl * dx / umax
            );
        }
    }

    /// Run `steps` steps, appending a ledger row every `sample_every` steps
    /// (and at the end) when a ledger is supplied.
    pub fn run(
        &self,
        s: &mut State,
        steps: usize,
        sample_every: usize,
        mut ledger: Option<&mut EnergyLedger>,
        mut traj: Option<&mut Trajectory>,
    ) -> Result<()> {
        let every = sample_every.max(1);
        let (mut cum_d, mut cum_w) = match ledger.as_deref() {
            Some(l) => l.rows.last().map_or((0.0, 0.0), |r| (r.cum_d, r.cum_w)),
            None => (0.0, 0.0),
        };
        let sampling = ledger.is_some() || traj.is_some();
        let record = |s: &State, cd: f64, cw: f64, ledger: &mut Option<&mut EnergyLedger>, traj: &mut Option<&mut Trajectory>| {
            if let Some(l) = ledger.as_deref_mut() {
                l.rows.push(self.ledger_row(s, cd, cw));
            }
            if let Some(tr) = traj.as_deref_mut() {
                tr.times.push(s.t);
                if self.opts.snapshots {
                    tr.snapshots.push(s.v.clone());
                }
            }
        };
        if sampling {
            let empty = ledger.as_deref().is_none_or(|l| l.rows.is_empty());
            if empty {
                if let Some(l) = ledger.as_deref_mut() {
                    l.dt = self.dt;
                }
                record(s, cum_d, cum_w, &mut ledger, &mut traj);
            }
            self.check_cfl(&s.v);
        }
        for i in 1..=steps {
            let rec = self.step(s)?;
            cum_d += self.dt * rec.d_half;
            cum_w += self.dt * rec.w_half;
            if sampling && (i % every == 0 || i == steps) {
                record(s, cum_d, cum_w, &mut ledger, &mut traj);
                self.check_cfl(&s.v);
            }
        }
        Ok(())
    }
}

fn check_finite(v: &SpectralField, t: f64) -> Result<()> {
    let ok = v
        .as_slice()
        .iter()
        .all(|a| a.re.abs() < BLOWUP_THRESHOLD && a.im.abs() < BLOWUP_THRESHOLD);
    if ok {
        return Ok(());
    }
    let (m, n, k, c, magnitude) = v.max_mode();
    Err(HpeError::BlowUp {
        t,
        m,
        n,
        k,
        c,
        magnitude,
    })
}

/// Number of steps covering `span` with step at most `dt`; the step is
/// shortened to `span / steps` when `dt` does not divide the span.
pub fn fit_steps(span: f64, dt: f64) -> (usize, f64) {
    let ratio = span / dt;
    let near = ratio.round();
    let steps = if (ratio - near).abs() <= 1e-9 * ratio.max(1.0) {
        near as usize
    } else {
        ratio.ceil() as usize
    };
    let steps = steps.max(1);
    (steps, span / steps as f64)
}

/// One step of size dt from `s` (convenience wrapper).
pub fn step(s: &State, dt: f64, fs: &ForcingSpec) -> Result<State> {
    let integ = Integrator::new(s.v.grid(), fs, dt, IntegratorOptions::default())?;
    let mut out = s.clone();
    integ.step(&mut out)?;
    Ok(out)
}

/// Integrate from t0 to t1 with default options.
pub fn integrate(
    v0: &SpectralField,
    t0: f64,
    t1: f64,
    dt: f64,
    fs: &ForcingSpec,
    sample_every: usize,
) -> Result<(State, EnergyLedger, Trajectory)> {
    integrate_with(v0, t0, t1, dt, fs, sample_every, IntegratorOptions::default())
}

/// Integrate from t0 to t1. An unconstrained initial field is projected
/// (and the projection noted in the ledger warnings).
pub fn integrate_with(
    v0: &SpectralField,
    t0: f64,
    t1: f64,
    dt: f64,
    fs: &ForcingSpec,
    sample_every: usize,
    opts: IntegratorOptions,
) -> Result<(State, EnergyLedger, Trajectory)> {
    if !(t1 > t0) {
        return Err(HpeError::validation("time", format!("t1 = {t1} must exceed t0 = {t0}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(HpeError::validation("time.dt", format!("dt must be positive, got {dt}")));
    }
    let (steps, dt_eff) = fit_steps(t1 - t0, dt);
    let mut ledger = EnergyLedger::default();
    if dt_eff != dt {
        let msg = format!("dt adjusted from {dt:e} to {dt_eff:e} to land on t1");
        log::info!("{msg}");
        ledger.warnings.push(msg);
    }
    let integ = Integrator::new(v0.grid(), fs, dt_eff, opts)?;
    ledger.warnings.extend(integ.forcing().truncated.iter().cloned());
    let v = constrained_start(v0, &mut ledger.warnings);
    let mut s = State::new(v, t0);
    let mut traj = Trajectory::default();
    integ.run(&mut s, steps, sample_every, Some(&mut ledger), Some(&mut traj))?;
    Ok((s, ledger, traj))
}

pub(crate) fn constrained_start(v0: &SpectralField, warnings: &mut Vec<String>) -> SpectralField {
    let r = constraint_residual(v0);
    let scale = v0.norm().max(f64::MIN_POSITIVE);
    if r > 1e-12 * scale {
        let msg = format!("initial field violated the constraint (residual {r:e}); projected");
        log::warn!("{msg}");
        warnings.push(msg);
        project(v0)
    } else {
        v0.clone()
    }
}

/// Σ over consecutive ledger rows of |ΔE + 2ΔD − 2ΔW|, where D and W are the
/// cumulative dissipation and work. With a row per step this is Σ|r_n| dt.
pub fn energy_balance_residual(ledger: &EnergyLedger) -> f64 {
    ledger
        .rows
        .windows(2)
        .map(|w| ((w[1].e - w[0].e) + 2.0 * (w[1].cum_d - w[0].cum_d) - 2.0 * (w[1].cum_w - w[0].cum_w)).abs())
        .sum()
}
