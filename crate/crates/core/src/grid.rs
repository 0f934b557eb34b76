//! Discrete function space: horizontal Fourier modes on the unit square times
//! quarter-wave sine profiles in the vertical.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{HpeError, Result};
use crate::transform::PhysLayout;

/// Resolution, vertical frequencies, collocation nodes and the precomputed
/// vertical transform matrices of a channel of depth `h`.
///
/// Horizontal wavenumbers are `-(M/2-1)..=M/2-1` (the Nyquist mode is kept at
/// zero so every stored field is Hermitian). Vertical profiles are
/// `ψ̂_k(z) = √(2/h) sin(μ_k (z+h))` with `μ_k = (2k+1)π/(2h)`.
pub struct Grid {
    m: usize,
    n: usize,
    k: usize,
    h: f64,
    q: usize,
    mu: Vec<f64>,
    zq: Vec<f64>,
    wq: Vec<f64>,
    cbar: Vec<f64>,
    /// ψ̂_k(zq_j), row-major `[j][k]`.
    pub(crate) sin_eval: Vec<f64>,
    /// √(2/h) cos(μ_k(zq_j + h)), row-major `[j][k]`.
    pub(crate) cos_eval: Vec<f64>,
    /// Quadrature projection `wq_j ψ̂_k(zq_j)`, row-major `[k][j]`.
    pub(crate) quad_proj: Vec<f64>,
    /// Exact projection of even-cosine content (quadratic products), `[k][j]`.
    pub(crate) prod_proj: Vec<f64>,
    pub(crate) layout: PhysLayout,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("M", &self.m)
            .field("N", &self.n)
            .field("K", &self.k)
            .field("h", &self.h)
            .field("Q", &self.q)
            .field("padM", &self.layout.pad_m)
            .field("padN", &self.layout.pad_n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
            && self.n == other.n
            && self.k == other.k
            && self.q == other.q
            && self.h.to_bits() == other.h.to_bits()
    }
}

/// Build a grid. `q` defaults to `2K`.
pub fn make_grid(m: usize, n: usize, k: usize, h: f64, q: Option<usize>) -> Result<Arc<Grid>> {
    Grid::new(m, n, k, h, q).map(Arc::new)
}

impl Grid {
    pub fn new(m: usize, n: usize, k: usize, h: f64, q: Option<usize>) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(HpeError::InvalidDimension(format!("M must be even and >= 2, got {m}")));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(HpeError::InvalidDimension(format!("N must be even and >= 2, got {n}")));
        }
        if k == 0 {
            return Err(HpeError::InvalidDimension("K must be >= 1".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(HpeError::InvalidDimension(format!("depth h must be positive, got {h}")));
        }
        let q = q.unwrap_or(2 * k);
        if q < 2 * k {
            return Err(HpeError::InvalidDimension(format!(
                "Q must be >= 2K = {}, got {q}",
                2 * k
            )));
        }

        let mu: Vec<f64> = (0..k).map(|j| (2 * j + 1) as f64 * PI / (2.0 * h)).collect();
        let wq = vec![h / q as f64; q];
        let zq: Vec<f64> = (0..q)
            .map(|j| -h + h * (2 * j + 1) as f64 / (2 * q) as f64)
            .collect();
        let norm = (2.0 / h).sqrt();
        let cbar: Vec<f64> = (0..k)
            .map(|j| norm * 2.0 / ((2 * j + 1) as f64 * PI))
            .collect();

        let mut sin_eval = vec![0.0; q * k];
        let mut cos_eval = vec![0.0; q * k];
        for j in 0..q {
            let s = zq[j] + h;
            for kk in 0..k {
                sin_eval[j * k + kk] = norm * (mu[kk] * s).sin();
                cos_eval[j * k + kk] = norm * (mu[kk] * s).cos();
            }
        }
        let mut quad_proj = vec![0.0; k * q];
        for kk in 0..k {
            for j in 0..q {
                quad_proj[kk * q + j] = wq[j] * sin_eval[j * k + kk];
            }
        }

        // Even-cosine content g(s) = Σ_p g_p cos(pπs/h), p < Q, is recovered exactly
        // from midpoint samples by a DCT-II; each cosine then projects onto ψ̂_r by
        // ∫_0^h cos(pπs/h) ψ̂_r ds = √(2/h) μ_r / (μ_r² − (pπ/h)²).
        let mut prod_proj = vec![0.0; k * q];
        for r in 0..k {
            for p in 0..q {
                let alpha = p as f64 * PI / h;
                let c = norm * mu[r] / (mu[r] * mu[r] - alpha * alpha);
                let scale = if p == 0 { 1.0 } else { 2.0 } / q as f64;
                for j in 0..q {
                    let basis = (p as f64 * PI * (2 * j + 1) as f64 / (2 * q) as f64).cos();
                    prod_proj[r * q + j] += c * scale * basis;
                }
            }
        }

        let layout = PhysLayout::new(3 * m / 2, 3 * n / 2, q);
        Ok(Grid {
            m,
            n,
            k,
            h,
            q,
            mu,
            zq,
            wq,
            cbar,
            sin_eval,
            cos_eval,
            quad_proj,
            prod_proj,
            layout,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn pad_m(&self) -> usize {
        self.layout.pad_m
    }
    pub fn pad_n(&self) -> usize {
        self.layout.pad_n
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn zq(&self) -> &[f64] {
        &self.zq
    }
    pub fn wq(&self) -> &[f64] {
        &self.wq
    }
    /// Vertical-average weights `(1/h)∫ψ̂_k dz`.
    pub fn cbar(&self) -> &[f64] {
        &self.cbar
    }

    /// Largest resolved horizontal wavenumber in x.
    pub fn max_m(&self) -> i64 {
        self.m as i64 / 2 - 1
    }
    pub fn max_n(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn contains_mode(&self, m: i64, n: i64) -> bool {
        m.abs() <= self.max_m() && n.abs() <= self.max_n()
    }

    /// Storage index along x for wavenumber `m`.
    #[inline]
    pub(crate) fn im(&self, m: i64) -> usize {
        m.rem_euclid(self.m as i64) as usize
    }
    #[inline]
    pub(crate) fn in_(&self, n: i64) -> usize {
        n.rem_euclid(self.n as i64) as usize
    }
    #[inline]
    pub(crate) fn wavenumber_m(&self, im: usize) -> i64 {
        if im < self.m / 2 {
            im as i64
        } else {
            im as i64 - self.m as i64
        }
    }
    #[inline]
    pub(crate) fn wavenumber_n(&self, in_: usize) -> i64 {
        if in_ < self.n / 2 {
            in_ as i64
        } else {
            in_ as i64 - self.n as i64
        }
    }

    /// Total number of stored complex coefficients.
    pub fn len(&self) -> usize {
        self.m * self.n * self.k * 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub(crate) fn idx(&self, im: usize, in_: usize, k: usize, c: usize) -> usize {
        ((im * self.n + in_) * self.k + k) * 2 + c
    }

    /// Iterate over resolved wavevectors `(m, n)` in a fixed order.
    pub fn wavevectors(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let mm = self.max_m();
        let nn = self.max_n();
        (-mm..=mm).flat_map(move |m| (-nn..=nn).map(move |n| (m, n)))
    }

    /// Eigenvalue of −Δ on mode (m, n, k).
    #[inline]
    pub fn lambda(&self, m: i64, n: i64, k: usize) -> f64 {
        let kh2 = 4.0 * PI * PI * (m * m + n * n) as f64;
        kh2 + self.mu[k] * self.mu[k]
    }

    /// |k_H| = 2π|(m, n)|.
    #[inline]
    pub fn kh_norm(&self, m: i64, n: i64) -> f64 {
        2.0 * PI * ((m * m + n * n) as f64).sqrt()
    }

    /// Same resolution and depth (Q may differ).
    pub fn same_space(&self, other: &Grid) -> bool {
        self.m == other.m && self.n == other.n && self.k == other.k && self.h.to_bits() == other.h.to_bits()
    }

    /// ψ̂_k(z) for arbitrary z.
    pub fn psi(&self, k: usize, z: f64) -> f64 {
        (2.0 / self.h).sqrt() * (self.mu[k] * (z + self.h)).sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequencies_for_unit_depth() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let expect = [PI / 2.0, 3.0 * PI / 2.0, 5.0 * PI / 2.0];
        for (a, b) in g.mu().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn frequencies_for_depth_two() {
        let g = make_grid(4, 4, 2, 2.0, None).unwrap();
        assert!((g.mu()[0] - PI / 4.0).abs() < 1e-15);
        assert!((g.mu()[1] - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_depth() {
        for (k, h) in [(1usize, 1.0), (5, 0.3), (12, 2.5)] {
            let g = make_grid(2, 2, k, h, None).unwrap();
            let s: f64 = g.wq().iter().sum();
            assert!(((s - h) / h).abs() < 1e-14);
        }
    }

    #[test]
    fn profile_boundary_conditions() {
        let g = make_grid(4, 4, 6, 1.7, None).unwrap();
        for k in 0..6 {
            assert!(g.psi(k, -g.h()).abs() < 1e-15);
            // derivative μ cos(μh) at the surface
            assert!((g.mu()[k] * (g.mu()[k] * g.h()).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn nodes_are_quarter_shifted() {
        let g = make_grid(2, 2, 3, 2.0, Some(8)).unwrap();
        for (j, z) in g.zq().iter().enumerate() {
            let expect = -2.0 + 2.0 * (2 * j + 1) as f64 / 16.0;
            assert_eq!(*z, expect);
        }
        assert!(g.pad_m() * 2 >= 3 * g.m());
    }

    #[test]
    fn rejects_invalid_dimensions() {
        assert!(make_grid(3, 4, 2, 1.0, None).is_err());
        assert!(make_grid(4, 0, 2, 1.0, None).is_err());
        assert!(make_grid(4, 4, 0, 1.0, None).is_err());
        assert!(make_grid(4, 4, 2, -1.0, None).is_err());
        assert!(make_grid(4, 4, 4, 1.0, Some(7)).is_err());
    }

    #[test]
    fn frequencies_strictly_increasing() {
        let g = make_grid(2, 2, 9, 0.8, None).unwrap();
        assert!(g.mu().windows(2).all(|w| w[1] > w[0]));
    }
}
