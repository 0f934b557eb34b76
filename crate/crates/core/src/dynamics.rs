//! Diagnostic vertical velocity, the advection term and the trilinear-form
//! estimators.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::transform::pack_xy;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `[m][n][k]` of w on the profiles cos(μ_k(z+h)).
#[derive(Clone, Debug, PartialEq)]
pub struct WField {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl WField {
    pub fn get(&self, m: i64, n: i64, k: usize) -> Complex64 {
        let g = &self.grid;
        if !g.contains_mode(m, n) {
            return ZERO;
        }
        self.data[(g.im(m) * g.n() + g.in_(n)) * g.k() + k]
    }

    /// Fourier coefficient of w at height z for wavevector (m, n).
    pub fn column_at(&self, m: i64, n: i64, z: f64) -> Complex64 {
        let g = &self.grid;
        (0..g.k())
            .map(|k| self.get(m, n, k) * (g.mu()[k] * (z + g.h())).cos())
            .sum()
    }

    /// max over wavevectors of |w(m, n, z)|.
    pub fn max_abs_at(&self, z: f64) -> f64 {
        self.grid
            .wavevectors()
            .map(|(m, n)| self.column_at(m, n, z).norm())
            .fold(0.0, f64::max)
    }

    pub fn norm_sq_coeffs(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// w(v) = ∫_z^0 div_H v dζ. Since ∫_z^0 ψ̂_k = √(2/h) cos(μ_k(z+h))/μ_k, the
/// coefficient is `2πi(m a_x + n a_y) √(2/h)/μ_k`.
pub fn compute_w(v: &SpectralField) -> WField {
    let g = v.grid().clone();
    let norm = (2.0 / g.h()).sqrt();
    let mut data = vec![ZERO; g.m() * g.n() * g.k()];
    for (m, n) in g.wavevectors() {
        let (im, in_) = (g.im(m), g.in_(n));
        for k in 0..g.k() {
            let d = divergence(v, im, in_, k, m, n);
            data[(im * g.n() + in_) * g.k() + k] = d * (norm / g.mu()[k]);
        }
    }
    WField { grid: g, data }
}

#[inline]
fn divergence(v: &SpectralField, im: usize, in_: usize, k: usize, m: i64, n: i64) -> Complex64 {
    let g = v.grid();
    let i = g.idx(im, in_, k, 0);
    let a = v.as_slice();
    (a[i] * m as f64 + a[i + 1] * n as f64) * Complex64::new(0.0, 2.0 * PI)
}

/// Which parts of the advection operator to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvectionTerms {
    Full,
    /// u · ∇_H φ only.
    Horizontal,
    /// w(u) ∂_z φ only.
    Vertical,
}

/// Galerkin projection of `u·∇_H φ + w(u) ∂_z φ`, alias-free.
pub fn advect(u: &SpectralField, phi: &SpectralField, terms: AdvectionTerms) -> Result<SpectralField> {
    u.same_grid(phi)?;
    let g = u.grid().clone();
    let lay = &g.layout;
    let horizontal = terms != AdvectionTerms::Vertical;
    let vertical = terms != AdvectionTerms::Horizontal;
    let kk = g.k();
    let a = phi.as_slice();
    let two_pi = 2.0 * PI;

    let mut out = if horizontal {
        let uu = lay.synth(&g, &g.sin_eval, pack_xy(u));
        // (∂x φ_c + i ∂y φ_c) has spectral coefficient φ_c (2πi m − 2π n)
        let grad = |c: usize| {
            let g = g.clone();
            move |im: usize, in_: usize, col: &mut [Complex64]| {
                let f = Complex64::new(-two_pi * g.wavenumber_n(in_) as f64, two_pi * g.wavenumber_m(im) as f64);
                for (k, slot) in col.iter_mut().enumerate() {
                    *slot = a[g.idx(im, in_, k, c)] * f;
                }
            }
        };
        let gx = lay.synth(&g, &g.sin_eval, grad(0));
        let gy = lay.synth(&g, &g.sin_eval, grad(1));
        uu.iter()
            .zip(gx.iter().zip(&gy))
            .map(|(u, (gx, gy))| {
                Complex64::new(u.re * gx.re + u.im * gx.im, u.re * gy.re + u.im * gy.im)
            })
            .collect::<Vec<_>>()
    } else {
        vec![ZERO; lay.nz * lay.pad_m * lay.pad_n]
    };

    if vertical {
        let mu = g.mu();
        let ua = u.as_slice();
        let w = lay.synth(&g, &g.cos_eval, |im, in_, col| {
            let (m, n) = (g.wavenumber_m(im) as f64, g.wavenumber_n(in_) as f64);
            for k in 0..kk {
                let i = g.idx(im, in_, k, 0);
                let d = (ua[i] * m + ua[i + 1] * n) * Complex64::new(0.0, two_pi);
                col[k] = d / mu[k];
            }
        });
        let dz = lay.synth(&g, &g.cos_eval, |im, in_, col| {
            for k in 0..kk {
                let i = g.idx(im, in_, k, 0);
                col[k] = (a[i] + Complex64::new(-a[i + 1].im, a[i + 1].re)) * mu[k];
            }
        });
        for ((o, w), dz) in out.iter_mut().zip(&w).zip(&dz) {
            *o += dz * w.re;
        }
    }

    let mut res = SpectralField::zeros(&g);
    {
        let data = res.as_mut_slice();
        lay.analyze(&g, &mut out, &g.prod_proj, |im, in_, ax, ay| {
            for k in 0..kk {
                let i = g.idx(im, in_, k, 0);
                data[i] = ax[k];
                data[i + 1] = ay[k];
            }
        });
    }
    Ok(res)
}

/// N(v) = v·∇_H v + w(v) ∂_z v, projected onto the basis.
pub fn nonlinear_term(v: &SpectralField) -> SpectralField {
    advect(v, v, AdvectionTerms::Full).expect("a field shares its own grid")
}

/// Both sides of the two trilinear estimates, without their unknown constants.
#[derive(Clone, Debug, Serialize)]
pub struct TrilinearReport {
    /// |(v1·∇_H v3, v2)|
    pub horizontal_lhs: f64,
    /// ‖v1‖^{1/2} ‖v1‖_{H¹}^{1/2} ‖v2‖_{H¹} ‖∇_H v3‖
    pub horizontal_rhs: f64,
    pub horizontal_ratio: f64,
    /// |(w(v1) ∂_z v3, v2)|
    pub vertical_lhs: f64,
    /// ‖∇_H v1‖ ‖v2‖^{1/2} ‖v2‖_{H¹}^{1/2} ‖∂_z v3‖^{1/2} ‖∂_z v3‖_{H¹}^{1/2}
    pub vertical_rhs: f64,
    pub vertical_ratio: f64,
    /// |(v1·∇_H v3 + w(v1) ∂_z v3, v2)|
    pub summed_lhs: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

pub fn trilinear_estimate_report(v1: &SpectralField, v2: &SpectralField, v3: &SpectralField) -> Result<TrilinearReport> {
    v1.same_grid(v2)?;
    v1.same_grid(v3)?;
    let nh = advect(v1, v3, AdvectionTerms::Horizontal)?;
    let nv = advect(v1, v3, AdvectionTerms::Vertical)?;
    let horizontal_lhs = nh.inner(v2).abs();
    let vertical_lhs = nv.inner(v2).abs();
    let summed_lhs = (nh.inner(v2) + nv.inner(v2)).abs();

    let n1 = v1.norm();
    let h1_1 = v1.norm_h1_sq().sqrt();
    let n2 = v2.norm();
    let h1_2 = v2.norm_h1_sq().sqrt();
    let dz3 = v3.norm_dz_sq().sqrt();
    let dz3_h1 = (v3.norm_dz_sq() + v3.norm_grad_dz_sq()).sqrt();
    let horizontal_rhs = (n1 * h1_1).sqrt() * h1_2 * v3.norm_grad_h_sq().sqrt();
    let vertical_rhs = v1.norm_grad_h_sq().sqrt() * (n2 * h1_2).sqrt() * (dz3 * dz3_h1).sqrt();
    Ok(TrilinearReport {
        horizontal_lhs,
        horizontal_rhs,
        horizontal_ratio: ratio(horizontal_lhs, horizontal_rhs),
        vertical_lhs,
        vertical_rhs,
        vertical_ratio: ratio(vertical_lhs, vertical_rhs),
        summed_lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::project;
    use crate::field::{X, Y};
    use crate::grid::make_grid;

    #[test]
    fn zero_field_has_zero_w_and_advection() {
        let g = make_grid(6, 6, 3, 1.0, None).unwrap();
        let z = SpectralField::zeros(&g);
        assert_eq!(compute_w(&z).norm_sq_coeffs(), 0.0);
        assert_eq!(nonlinear_term(&z).norm(), 0.0);
    }

    #[test]
    fn w_of_single_parallel_mode() {
        let g = make_grid(4, 4, 1, 1.0, None).unwrap();
        let mut v = SpectralField::zeros(&g);
        v.set_mode(1, 0, 0, X, Complex64::new(1.0, 0.0));
        let w = compute_w(&v);
        let bottom = w.column_at(1, 0, -1.0);
        let expect = Complex64::new(0.0, 2.0 * PI * 2f64.sqrt() * 2.0 / PI);
        assert!((bottom - expect).norm() < 1e-13);
        assert!(w.column_at(1, 0, 0.0).norm() < 1e-14);
        assert!(compute_w(&project(&v)).max_abs_at(-1.0) < 1e-13);
    }

    #[test]
    fn w_at_surface_vanishes() {
        let g = make_grid(8, 8, 6, 1.4, None).unwrap();
        let v = SpectralField::random(&g, 4, 0.0);
        assert!(compute_w(&v).max_abs_at(0.0) < 1e-13);
    }

    #[test]
    fn shear_along_y_is_steady() {
        let g = make_grid(8, 8, 4, 1.0, None).unwrap();
        let mut v = SpectralField::zeros(&g);
        v.set_mode(1, 0, 0, Y, Complex64::new(0.7, 0.2));
        v.set_mode(1, 0, 2, Y, Complex64::new(-0.3, 0.1));
        v.set_mode(2, 0, 1, Y, Complex64::new(0.1, 0.4));
        assert!(nonlinear_term(&v).norm() < 1e-14);
    }

    #[test]
    fn advection_is_skew() {
        let g = make_grid(8, 8, 6, 1.0, None).unwrap();
        for seed in 0..5 {
            let v = project(&SpectralField::random(&g, seed, 0.0));
            let nv = nonlinear_term(&v);
            let scale = v.norm() * v.norm_grad_sq();
            assert!(nv.inner(&v).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn parts_sum_to_full() {
        let g = make_grid(6, 8, 4, 0.8, None).unwrap();
        let u = SpectralField::random(&g, 1, 0.0);
        let p = SpectralField::random(&g, 2, 0.0);
        let full = advect(&u, &p, AdvectionTerms::Full).unwrap();
        let h = advect(&u, &p, AdvectionTerms::Horizontal).unwrap();
        let v = advect(&u, &p, AdvectionTerms::Vertical).unwrap();
        assert!(full.sub(&h.add(&v)).norm() < 1e-12 * full.norm());
    }

    #[test]
    fn trilinear_zero_argument() {
        let g = make_grid(6, 6, 3, 1.0, None).unwrap();
        let z = SpectralField::zeros(&g);
        let v = SpectralField::random(&g, 3, 0.0);
        for (a, b, c) in [(&z, &v, &v), (&v, &z, &v), (&v, &v, &z)] {
            let r = trilinear_estimate_report(a, b, c).unwrap();
            assert_eq!(r.horizontal_lhs, 0.0);
            assert_eq!(r.vertical_lhs, 0.0);
        }
    }
}
