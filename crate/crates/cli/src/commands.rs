//! Subcommand bodies. Each returns the process exit status on completion.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use hpe_core::constraint::project;
use hpe_core::diagnostics::{
    apriori_bound_check, gronwall_weights, h1_monitor, l2_energy_bound_check, poincare_report, weak_strong_compare,
    ComparatorResult, TwinProblem,
};
use hpe_core::forcing::{CompiledForcing, ForcingSpec};
use hpe_core::integrator::{energy_balance_residual, integrate_with, IntegratorOptions};
use hpe_core::io::config::{InitialConfig, Method, RunConfig};
use hpe_core::io::{emit_monitor, emit_series, load_checkpoint_on, parse_config, save_checkpoint};
use hpe_core::periodic::{
    ball_radius_compiled, newton_with, picard_with, steady_solve_with, PoincareMap, ShootOptions, SteadyOptions,
};
use hpe_core::selftest::run_selftest;
use hpe_core::{make_grid, Grid, HpeError, Result, SpectralField};

use crate::Overrides;

fn parse_resolution(s: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let bad = || HpeError::Validation {
        field: "--resolution".into(),
        message: format!("expected MxNxK, got `{s}`"),
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let p = |i: usize| parts[i].trim().parse::<usize>().map_err(|_| bad());
    Ok((p(0)?, p(1)?, p(2)?))
}

fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = parse_config(path)?;
    if let Some(r) = &ov.resolution {
        let (m, n, k) = parse_resolution(r)?;
        cfg.set_resolution(m, n, k);
    }
    if let Some(t) = ov.tol {
        cfg.solver.tol = t;
    }
    if let Some(n) = ov.max_iters {
        cfg.solver.maxit = n;
    }
    if let Some(m) = &ov.method {
        cfg.solver.method = m.parse()?;
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HpeError::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Initial data per the `initial` section; checkpoint paths are relative to
/// the configuration file.
fn initial_field(cfg: &RunConfig, grid: &Arc<Grid>, config_path: &Path) -> Result<SpectralField> {
    match &cfg.initial {
        InitialConfig::Zero => Ok(SpectralField::zeros(grid)),
        InitialConfig::Random { amplitude, decay } => {
            let mut v = project(&SpectralField::random(grid, cfg.seed, *decay));
            let n = v.norm();
            if n > 0.0 {
                v.scale(amplitude / n);
            }
            Ok(v)
        }
        InitialConfig::Checkpoint { path } => {
            let p = Path::new(path);
            let p = if p.is_relative() {
                config_path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.to_path_buf()
            };
            Ok(load_checkpoint_on(p, grid)?.v)
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    t_end: f64,
    dt: f64,
    rows: usize,
    energy_residual: f64,
    #[serde(rename = "final_norm_v_L2")]
    final_norm_v: f64,
    ball_radius: Option<f64>,
    checks: Vec<CheckLine>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    pass: bool,
    worst_margin: f64,
}

pub fn simulate(config: &Path, ov: &Overrides) -> Result<u8> {
    let cfg = load_config(config, ov)?;
    let grid = cfg.make_grid()?;
    let fs = cfg.forcing_spec()?;
    let dir = out_dir(&cfg)?;
    let v0 = initial_field(&cfg, &grid, config)?;
    let opts = IntegratorOptions {
        nonlinear: cfg.solver.nonlinear,
        cfl: cfg.solver.cfl,
        snapshots: true,
        monitors: true,
        l4_monitor: true,
    };
    let t_end = cfg.t_end();
    log::info!(
        "simulate {}x{}x{} to t = {t_end} with dt = {:e}",
        grid.m(),
        grid.n(),
        grid.k(),
        cfg.time.dt
    );
    let (state, ledger, traj) = integrate_with(&v0, 0.0, t_end, cfg.time.dt, &fs, cfg.output.sample_every, opts)?;
    let cf = CompiledForcing::new(&fs, &grid)?;
    let h = grid.h();
    let radius = fs.period().map(|p| ball_radius_compiled(&cf, p, h));
    let mut reports = apriori_bound_check(&ledger, &cf, h, radius);
    reports.push(l2_energy_bound_check(&ledger, &cf, h));
    reports.push(poincare_report(&traj, h, ledger.dt));
    let h1 = h1_monitor(&traj, Some(&ledger))?;
    let gronwall = gronwall_weights(&traj, Some(&cf))?;

    emit_series(&ledger, dir.join("ledger.csv"))?;
    for r in &reports {
        emit_monitor(r, dir.join(format!("monitor_{}.csv", r.name)))?;
    }
    write_json(&dir.join("reports.json"), &reports)?;
    write_json(&dir.join("h1_monitor.json"), &h1)?;
    write_json(&dir.join("gronwall.json"), &gronwall)?;
    save_checkpoint(&state, dir.join("final.chk"))?;
    if cfg.output.snapshots {
        for (i, v) in traj.snapshots.iter().enumerate() {
            let s = hpe_core::integrator::State::new(v.clone(), traj.times[i]);
            save_checkpoint(&s, dir.join(format!("snapshot_{i:05}.chk")))?;
        }
    }
    let checks: Vec<CheckLine> = reports
        .iter()
        .map(|r| CheckLine {
            name: r.name.clone(),
            pass: r.pass,
            worst_margin: r.worst_margin,
        })
        .collect();
    for c in &checks {
        log::info!("{}: {}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    let summary = SimulateSummary {
        t_end: state.t,
        dt: ledger.dt,
        rows: ledger.rows.len(),
        energy_residual: energy_balance_residual(&ledger),
        final_norm_v: state.v.norm(),
        ball_radius: radius,
        checks,
        warnings: ledger.warnings.clone(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(0)
}

#[derive(Serialize)]
struct FailedShoot<'a> {
    method: &'a str,
    converged: bool,
    iterations: usize,
    final_residual: f64,
    residuals: &'a [f64],
}

pub fn periodic(config: &Path, ov: &Overrides) -> Result<u8> {
    let cfg = load_config(config, ov)?;
    let grid = cfg.make_grid()?;
    let fs = cfg.forcing_spec()?;
    let dir = out_dir(&cfg)?;
    let a0 = initial_field(&cfg, &grid, config)?;
    let map = PoincareMap::new(&grid, &fs, cfg.period(), cfg.time.dt, cfg.solver.nonlinear)?;
    let opts = ShootOptions {
        tol: cfg.solver.tol,
        maxit: cfg.solver.maxit,
        krylov_dim: cfg.solver.krylov_dim,
        sample_every: cfg.output.sample_every,
        ..ShootOptions::default()
    };
    let method = cfg.solver.method;
    log::info!(
        "periodic ({method:?}) {}x{}x{}, T = {}, dt = {:e} ({} steps)",
        grid.m(),
        grid.n(),
        grid.k(),
        map.period(),
        map.dt(),
        map.steps()
    );
    let result = match method {
        Method::Picard => picard_with(&map, &a0, &opts),
        Method::Newton => newton_with(&map, &a0, &opts),
    };
    let res = match result {
        Ok(r) => r,
        Err(HpeError::NoConvergence {
            method,
            iterations,
            last,
            residuals,
        }) => {
            write_json(
                &dir.join("shoot.json"),
                &FailedShoot {
                    method,
                    converged: false,
                    iterations,
                    final_residual: last,
                    residuals: &residuals,
                },
            )?;
            return Err(HpeError::NoConvergence {
                method,
                iterations,
                last,
                residuals,
            });
        }
        Err(e) => return Err(e),
    };
    let summary = res.summary();
    write_json(&dir.join("shoot.json"), &summary)?;
    emit_series(&res.orbit_ledger, dir.join("orbit_ledger.csv"))?;
    save_checkpoint(&hpe_core::integrator::State::new(res.a_star.clone(), 0.0), dir.join("a_star.chk"))?;
    log::info!(
        "converged in {} iterations, residual {:.3e}; orbit check {}, dissipation check {}",
        res.iterations,
        res.final_residual(),
        if res.orbit_verified { "pass" } else { "FAIL" },
        if res.dissipation.pass { "pass" } else { "FAIL" }
    );
    Ok(if res.orbit_verified { 0 } else { 2 })
}

pub fn steady(config: &Path, ov: &Overrides) -> Result<u8> {
    let cfg = load_config(config, ov)?;
    let grid = cfg.make_grid()?;
    let fs = cfg.forcing_spec()?;
    let dir = out_dir(&cfg)?;
    let opts = SteadyOptions {
        tol: cfg.solver.tol,
        newton_maxit: cfg.solver.maxit,
        krylov_dim: cfg.solver.krylov_dim,
        check_period: cfg.period(),
        check_dt: cfg.time.dt,
        ..SteadyOptions::default()
    };
    let res = steady_solve_with(&fs, &grid, &opts)?;
    write_json(&dir.join("steady.json"), &res.summary())?;
    save_checkpoint(&hpe_core::integrator::State::new(res.v.clone(), 0.0), dir.join("steady.chk"))?;
    let mut csv = String::from("m,n,pi_re,pi_im\n");
    for (m, n) in grid.wavevectors() {
        let p = res.pressure.get(m, n);
        csv.push_str(&format!("{m},{n},{:.16e},{:.16e}\n", p.re, p.im));
    }
    std::fs::write(dir.join("pressure.csv"), csv)?;
    log::info!(
        "steady residual {:.3e} after {} pseudo-time steps and {} Newton steps",
        res.residual,
        res.pseudo_steps,
        res.newton_iterations
    );
    Ok(0)
}

#[derive(Serialize)]
struct CompareEntry {
    coarse: [usize; 3],
    fine: [usize; 3],
    result: ComparatorResult,
}

pub fn compare(config: &Path, ov: &Overrides) -> Result<u8> {
    let cfg = load_config(config, ov)?;
    let fine = cfg.make_grid()?;
    let fs: ForcingSpec = cfg.forcing_spec()?;
    let dir = out_dir(&cfg)?;
    let coarse_list = match &cfg.compare {
        Some(c) => c.coarse.clone(),
        None => vec![[(fine.m() / 2).max(2) & !1, (fine.n() / 2).max(2) & !1, (fine.k() / 2).max(1)]],
    };
    let problem = TwinProblem {
        forcing: fs,
        dt: cfg.time.dt,
        t_end: cfg.t_end(),
        sample_every: cfg.output.sample_every,
        initial: initial_field(&cfg, &fine, config)?,
    };
    let mut out = Vec::new();
    for c in coarse_list {
        let coarse = make_grid(c[0], c[1], c[2], fine.h(), None)?;
        let result = weak_strong_compare(&problem, &coarse, &fine)?;
        log::info!(
            "{}x{}x{} vs {}x{}x{}: sup sigma = {:.3e}",
            c[0],
            c[1],
            c[2],
            fine.m(),
            fine.n(),
            fine.k(),
            result.sup_sigma
        );
        out.push(CompareEntry {
            coarse: c,
            fine: [fine.m(), fine.n(), fine.k()],
            result,
        });
    }
    write_json(&dir.join("compare.json"), &out)?;
    Ok(0)
}

pub fn selftest(config: Option<&Path>, ov: &Overrides) -> Result<u8> {
    let seed = match (ov.seed, config) {
        (Some(s), _) => s,
        (None, Some(p)) => load_config(p, ov)?.seed,
        (None, None) => 0,
    };
    let report = run_selftest(seed);
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = &ov.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("selftest.json"), &report)?;
    }
    Ok(if report.pass { 0 } else { 1 })
}
