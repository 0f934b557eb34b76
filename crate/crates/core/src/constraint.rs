//! The barotropic constraint div_H v̄ = 0: orthogonal projection, bordered
//! implicit solves and pressure recovery.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{HpeError, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

/// Vertical-average weights and the per-wavevector constraint direction.
#[derive(Clone, Debug)]
pub struct ConstraintData {
    pub cbar: Vec<f64>,
    cbar_sq: f64,
}

impl ConstraintData {
    pub fn new(grid: &Grid) -> Self {
        let cbar = grid.cbar().to_vec();
        let cbar_sq = cbar.iter().map(|c| c * c).sum();
        ConstraintData { cbar, cbar_sq }
    }

    /// Unit vector k_H/|k_H|; `None` at the zero wavevector.
    pub fn direction(m: i64, n: i64) -> Option<(f64, f64)> {
        if m == 0 && n == 0 {
            return None;
        }
        let r = ((m * m + n * n) as f64).sqrt();
        Some((m as f64 / r, n as f64 / r))
    }
}

/// Zero-mean z-independent pressure, Fourier coefficients `[m][n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl PressureField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        PressureField {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.m() * grid.n()],
        }
    }

    pub fn get(&self, m: i64, n: i64) -> Complex64 {
        let g = &self.grid;
        if !g.contains_mode(m, n) {
            return Complex64::new(0.0, 0.0);
        }
        self.data[g.im(m) * g.n() + g.in_(n)]
    }

    pub(crate) fn set(&mut self, m: i64, n: i64, value: Complex64) {
        let g = self.grid.clone();
        self.data[g.im(m) * g.n() + g.in_(n)] = value;
    }

    /// ‖∇_H π‖²_{L²(G)}.
    pub fn norm_grad_sq(&self) -> f64 {
        let g = &self.grid;
        g.wavevectors()
            .map(|(m, n)| g.kh_norm(m, n).powi(2) * self.get(m, n).norm_sqr())
            .sum()
    }
}

/// Orthogonal projection onto fields with div_H v̄ = 0.
pub fn project(v: &SpectralField) -> SpectralField {
    let mut out = v.clone();
    project_in_place(&mut out);
    out
}

pub(crate) fn project_in_place(v: &mut SpectralField) {
    let g = v.grid().clone();
    let cd = ConstraintData::new(&g);
    let kk = g.k();
    let data = v.as_mut_slice();
    for (m, n) in g.wavevectors() {
        let Some((ex, ey)) = ConstraintData::direction(m, n) else {
            continue;
        };
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..kk {
            let par = data[base + 2 * k] * ex + data[base + 2 * k + 1] * ey;
            s += par * cd.cbar[k];
        }
        s /= cd.cbar_sq;
        for k in 0..kk {
            let d = s * cd.cbar[k];
            data[base + 2 * k] -= d * ex;
            data[base + 2 * k + 1] -= d * ey;
        }
    }
}

/// max over wavevectors of |k_H · v̄(m, n)|.
pub fn constraint_residual(v: &SpectralField) -> f64 {
    v.vertical_average().max_divergence()
}

/// Solve `d[k] a[k] + γ cbar[k] = b[k]` subject to `Σ cbar[k] a[k] = 0`.
pub fn solve_bordered(d: &[f64], b: &[Complex64], cd: &ConstraintData) -> Result<(Vec<Complex64>, Complex64)> {
    let mut a = vec![Complex64::new(0.0, 0.0); b.len()];
    let gamma = solve_bordered_into(d, b, &cd.cbar, &mut a)?;
    Ok((a, gamma))
}

pub(crate) fn solve_bordered_into(d: &[f64], b: &[Complex64], cbar: &[f64], a: &mut [Complex64]) -> Result<Complex64> {
    if d.len() != b.len() || b.len() != cbar.len() || a.len() != b.len() {
        return Err(HpeError::ShapeMismatch("bordered system sizes differ".into()));
    }
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for k in 0..d.len() {
        num += b[k] * (cbar[k] / d[k]);
        den += cbar[k] * cbar[k] / d[k];
    }
    if !(den > f64::MIN_POSITIVE) || !den.is_finite() {
        return Err(HpeError::DegenerateConstraint(den));
    }
    let gamma = num / den;
    for k in 0..d.len() {
        a[k] = (b[k] - gamma * cbar[k]) / d[k];
    }
    Ok(gamma)
}

/// π̂(m, n) = γ / (i |k_H| h).
pub fn pressure_from_multiplier(gamma: Complex64, m: i64, n: i64, grid: &Grid) -> Result<Complex64> {
    if m == 0 && n == 0 {
        return Err(HpeError::ZeroWavevector);
    }
    Ok(gamma / Complex64::new(0.0, grid.kh_norm(m, n) * grid.h()))
}

/// Pressure whose gradient carries the constraint-parallel part of `r`:
/// `r − P r = ∇_H π` in coefficient space.
pub fn pressure_of_residual(r: &SpectralField) -> PressureField {
    let g = r.grid().clone();
    let cd = ConstraintData::new(&g);
    let data = r.as_slice();
    let mut p = PressureField::zeros(&g);
    for (m, n) in g.wavevectors() {
        let Some((ex, ey)) = ConstraintData::direction(m, n) else {
            continue;
        };
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..g.k() {
            s += (data[base + 2 * k] * ex + data[base + 2 * k + 1] * ey) * cd.cbar[k];
        }
        let gamma = s / cd.cbar_sq;
        p.set(m, n, pressure_from_multiplier(gamma, m, n, &g).unwrap_or_default());
    }
    p
}

/// Stokes operator A v = −Δv on the basis: multiply each mode by λ.
pub fn apply_stokes(v: &SpectralField) -> SpectralField {
    let g = v.grid().clone();
    let mut out = v.clone();
    let data = out.as_mut_slice();
    for (m, n) in g.wavevectors() {
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        for k in 0..g.k() {
            let l = g.lambda(m, n, k);
            data[base + 2 * k] *= l;
            data[base + 2 * k + 1] *= l;
        }
    }
    out
}

/// Solve `A v + ∇_H π = b`, `div_H v̄ = 0` exactly, wavevector by wavevector.
pub fn stokes_solve(b: &SpectralField) -> (SpectralField, PressureField) {
    let g = b.grid().clone();
    let cbar = g.cbar().to_vec();
    let kk = g.k();
    let mut out = SpectralField::zeros(&g);
    let mut p = PressureField::zeros(&g);
    let src = b.as_slice();
    let dst = out.as_mut_slice();
    let mut d = vec![0.0; kk];
    for (m, n) in g.wavevectors() {
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = g.lambda(m, n, k);
        }
        match ConstraintData::direction(m, n) {
            None => {
                for k in 0..kk {
                    dst[base + 2 * k] = src[base + 2 * k] / d[k];
                    dst[base + 2 * k + 1] = src[base + 2 * k + 1] / d[k];
                }
            }
            Some((ex, ey)) => {
                let mut num = Complex64::new(0.0, 0.0);
                let mut den = 0.0;
                for k in 0..kk {
                    let par = src[base + 2 * k] * ex + src[base + 2 * k + 1] * ey;
                    num += par * (cbar[k] / d[k]);
                    den += cbar[k] * cbar[k] / d[k];
                }
                let gamma = num / den;
                for k in 0..kk {
                    let c = gamma * cbar[k];
                    dst[base + 2 * k] = (src[base + 2 * k] - c * ex) / d[k];
                    dst[base + 2 * k + 1] = (src[base + 2 * k + 1] - c * ey) / d[k];
                }
                p.set(m, n, pressure_from_multiplier(gamma, m, n, &g).unwrap_or_default());
            }
        }
    }
    (out, p)
}
