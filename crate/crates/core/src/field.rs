//! Spectral coefficient arrays of the horizontal velocity and their norms.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HpeError, Result};
use crate::grid::Grid;

/// Velocity component index.
pub const X: usize = 0;
pub const Y: usize = 1;

/// Coefficients `a[m][n][k][c]` of the horizontal velocity on
/// `e^{2πi(mx+ny)} ψ̂_k(z)`. Always Hermitian: `a(-m,-n) = conj(a(m,n))`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.data == other.data
    }
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        SpectralField { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Coefficient of mode (m, n, k) in component c.
    pub fn get(&self, m: i64, n: i64, k: usize, c: usize) -> Complex64 {
        let g = &self.grid;
        if !g.contains_mode(m, n) {
            return Complex64::new(0.0, 0.0);
        }
        self.data[g.idx(g.im(m), g.in_(n), k, c)]
    }

    /// Set mode (m, n, k, c) and its conjugate partner. The zero wavevector
    /// keeps only the real part.
    pub fn set_mode(&mut self, m: i64, n: i64, k: usize, c: usize, value: Complex64) {
        let g = self.grid.clone();
        assert!(g.contains_mode(m, n), "mode ({m},{n}) outside the grid");
        if m == 0 && n == 0 {
            self.data[g.idx(0, 0, k, c)] = Complex64::new(value.re, 0.0);
            return;
        }
        self.data[g.idx(g.im(m), g.in_(n), k, c)] = value;
        self.data[g.idx(g.im(-m), g.in_(-n), k, c)] = value.conj();
    }

    pub(crate) fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(HpeError::GridMismatch)
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &SpectralField) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            data: self.data.iter().map(|a| a * alpha).collect(),
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.data {
            *a *= alpha;
        }
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// L² inner product over the channel (Parseval).
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Weighted sum `Σ weight(m, n, k) |a|²` in the fixed storage order.
    pub fn weighted_norm_sq<F: Fn(i64, i64, usize) -> f64>(&self, weight: F) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for im in 0..g.m() {
            let m = g.wavenumber_m(im);
            for in_ in 0..g.n() {
                let n = g.wavenumber_n(in_);
                for k in 0..g.k() {
                    let i = g.idx(im, in_, k, 0);
                    let e = self.data[i].norm_sqr() + self.data[i + 1].norm_sqr();
                    if e != 0.0 {
                        total += weight(m, n, k) * e;
                    }
                }
            }
        }
        total
    }

    /// ‖∇v‖₂², horizontal and vertical derivatives included.
    pub fn norm_grad_sq(&self) -> f64 {
        let g = self.grid.clone();
        self.weighted_norm_sq(|m, n, k| g.lambda(m, n, k))
    }

    /// ‖∇_H v‖₂².
    pub fn norm_grad_h_sq(&self) -> f64 {
        self.weighted_norm_sq(|m, n, _| 4.0 * PI * PI * (m * m + n * n) as f64)
    }

    /// ‖∂_z v‖₂².
    pub fn norm_dz_sq(&self) -> f64 {
        let g = self.grid.clone();
        self.weighted_norm_sq(|_, _, k| g.mu()[k] * g.mu()[k])
    }

    /// ‖Δv‖₂².
    pub fn norm_lap_sq(&self) -> f64 {
        let g = self.grid.clone();
        self.weighted_norm_sq(|m, n, k| g.lambda(m, n, k).powi(2))
    }

    /// ‖∇ ∂_z v‖₂².
    pub fn norm_grad_dz_sq(&self) -> f64 {
        let g = self.grid.clone();
        self.weighted_norm_sq(|m, n, k| g.mu()[k] * g.mu()[k] * g.lambda(m, n, k))
    }

    /// ‖v‖²_{H¹} = ‖v‖² + ‖∇v‖².
    pub fn norm_h1_sq(&self) -> f64 {
        let g = self.grid.clone();
        self.weighted_norm_sq(|m, n, k| 1.0 + g.lambda(m, n, k))
    }

    /// Vertical average `v̄ = (1/h)∫v dz`.
    pub fn vertical_average(&self) -> BarotropicField {
        let g = &self.grid;
        let mut out = BarotropicField::zeros(g);
        for im in 0..g.m() {
            for in_ in 0..g.n() {
                for c in 0..2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..g.k() {
                        acc += self.data[g.idx(im, in_, k, c)] * g.cbar()[k];
                    }
                    out.data[(im * g.n() + in_) * 2 + c] = acc;
                }
            }
        }
        out
    }

    /// Largest |a| and its mode.
    pub fn max_mode(&self) -> (i64, i64, usize, usize, f64) {
        let g = &self.grid;
        let mut best = (0, 0, 0, 0, -1.0);
        for im in 0..g.m() {
            for in_ in 0..g.n() {
                for k in 0..g.k() {
                    for c in 0..2 {
                        let a = self.data[g.idx(im, in_, k, c)];
                        let mag = if a.re.is_finite() && a.im.is_finite() {
                            a.norm()
                        } else {
                            f64::INFINITY
                        };
                        if mag > best.4 {
                            best = (g.wavenumber_m(im), g.wavenumber_n(in_), k, c, mag);
                        }
                    }
                }
            }
        }
        best
    }

    /// Restore exact Hermitian symmetry and zero the Nyquist rows.
    pub fn symmetrize(&mut self) {
        let g = self.grid.clone();
        let (mm, nn) = (g.m(), g.n());
        for im in 0..mm {
            for in_ in 0..nn {
                let nyquist = im == mm / 2 || in_ == nn / 2;
                let jm = (mm - im) % mm;
                let jn = (nn - in_) % nn;
                let self_partner = jm == im && jn == in_;
                for k in 0..g.k() {
                    for c in 0..2 {
                        let i = g.idx(im, in_, k, c);
                        if nyquist {
                            self.data[i] = Complex64::new(0.0, 0.0);
                        } else if self_partner {
                            self.data[i].im = 0.0;
                        } else if (im, in_) < (jm, jn) {
                            let j = g.idx(jm, jn, k, c);
                            let avg = (self.data[i] + self.data[j].conj()) * 0.5;
                            self.data[i] = avg;
                            self.data[j] = avg.conj();
                        }
                    }
                }
            }
        }
    }

    /// Copy into a grid with at least as many modes (same depth), zero-padding.
    pub fn embed_into(&self, target: &Arc<Grid>) -> Result<SpectralField> {
        let g = &self.grid;
        if target.h().to_bits() != g.h().to_bits() {
            return Err(HpeError::IncompatibleProblem("depths differ".into()));
        }
        if target.max_m() < g.max_m() || target.max_n() < g.max_n() || target.k() < g.k() {
            return Err(HpeError::IncompatibleProblem(
                "target grid is coarser than the source".into(),
            ));
        }
        let mut out = SpectralField::zeros(target);
        for (m, n) in g.wavevectors() {
            for k in 0..g.k() {
                for c in 0..2 {
                    let i = target.idx(target.im(m), target.in_(n), k, c);
                    out.data[i] = self.get(m, n, k, c);
                }
            }
        }
        Ok(out)
    }

    /// Truncate onto a grid with the same depth, dropping unresolved modes.
    pub fn restrict_to(&self, target: &Arc<Grid>) -> Result<SpectralField> {
        let g = &self.grid;
        if target.h().to_bits() != g.h().to_bits() {
            return Err(HpeError::IncompatibleProblem("depths differ".into()));
        }
        let mut out = SpectralField::zeros(target);
        for (m, n) in target.wavevectors() {
            for k in 0..target.k().min(g.k()) {
                for c in 0..2 {
                    let i = target.idx(target.im(m), target.in_(n), k, c);
                    out.data[i] = self.get(m, n, k, c);
                }
            }
        }
        Ok(out)
    }

    /// Seeded random Hermitian field with coefficient spread `~ 1/(1+λ)^decay`
    /// (set `decay = 0` for white noise), scaled to unit L² norm.
    pub fn random(grid: &Arc<Grid>, seed: u64, decay: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = SpectralField::zeros(grid);
        let g = grid.clone();
        for (m, n) in g.wavevectors() {
            // visit each conjugate pair once
            if (m, n) < (0, 0) {
                continue;
            }
            for k in 0..g.k() {
                let amp = (1.0 + g.lambda(m, n, k)).powf(-decay);
                for c in 0..2 {
                    let re: f64 = rng.gen_range(-1.0..1.0);
                    let im: f64 = rng.gen_range(-1.0..1.0);
                    out.set_mode(m, n, k, c, Complex64::new(re, im) * amp);
                }
            }
        }
        let nrm = out.norm();
        if nrm > 0.0 {
            out.scale(1.0 / nrm);
        }
        out
    }
}

/// Fourier coefficients `[m][n][c]` of a z-independent horizontal field on G.
#[derive(Clone, Debug, PartialEq)]
pub struct BarotropicField {
    grid: Arc<Grid>,
    data: Vec<Complex64>,
}

impl BarotropicField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        BarotropicField {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.m() * grid.n() * 2],
        }
    }

    pub fn get(&self, m: i64, n: i64, c: usize) -> Complex64 {
        let g = &self.grid;
        if !g.contains_mode(m, n) {
            return Complex64::new(0.0, 0.0);
        }
        self.data[(g.im(m) * g.n() + g.in_(n)) * 2 + c]
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// ‖v̄‖²_{L²(G)}.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ‖∇_H v̄‖²_{L²(G)}.
    pub fn norm_grad_sq(&self) -> f64 {
        let g = &self.grid;
        let mut total = 0.0;
        for (m, n) in g.wavevectors() {
            let w = 4.0 * PI * PI * (m * m + n * n) as f64;
            total += w * (self.get(m, n, X).norm_sqr() + self.get(m, n, Y).norm_sqr());
        }
        total
    }

    /// ‖v̄‖²_{H¹(G)}.
    pub fn norm_h1_sq(&self) -> f64 {
        self.norm_sq() + self.norm_grad_sq()
    }

    /// max over wavevectors of |k_H · v̄(m, n)|.
    pub fn max_divergence(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for (m, n) in g.wavevectors() {
            let d = self.get(m, n, X) * (2.0 * PI * m as f64) + self.get(m, n, Y) * (2.0 * PI * n as f64);
            worst = worst.max(d.norm());
        }
        worst
    }
}
