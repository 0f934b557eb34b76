//! Reference computations that share nothing with the library's fast paths:
//! direct summation in physical space, dense linear algebra and closed-form
//! responses. Only the public coefficient accessors are used.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use hpe_core::forcing::{ForcingSpec, Profile};
use hpe_core::{Grid, SpectralField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Gauss–Legendre nodes and weights on [a, b] by Newton iteration on P_n.
pub fn gauss(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (b - a) * t + 0.5 * (b + a);
        w[i] = (b - a) / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

pub fn mu(h: f64, k: usize) -> f64 {
    (2 * k + 1) as f64 * PI / (2.0 * h)
}

pub fn psi(h: f64, k: usize, z: f64) -> f64 {
    (2.0 / h).sqrt() * (mu(h, k) * (z + h)).sin()
}

pub fn dpsi(h: f64, k: usize, z: f64) -> f64 {
    (2.0 / h).sqrt() * mu(h, k) * (mu(h, k) * (z + h)).cos()
}

/// (1/h)∫ψ_k dz by quadrature.
pub fn vertical_mean(h: f64, k: usize) -> f64 {
    let (z, w) = gauss(64, -h, 0.0);
    z.iter().zip(&w).map(|(z, w)| w * psi(h, k, *z)).sum::<f64>() / h
}

/// Every resolved coefficient (both conjugate partners) in a fixed order.
pub fn modes(g: &Grid) -> Vec<(i64, i64, usize, usize)> {
    let mut out = Vec::new();
    for m in -g.max_m()..=g.max_m() {
        for n in -g.max_n()..=g.max_n() {
            for k in 0..g.k() {
                for c in 0..2 {
                    out.push((m, n, k, c));
                }
            }
        }
    }
    out
}

pub fn to_vec(v: &SpectralField) -> DVector<Complex64> {
    let ms = modes(v.grid());
    DVector::from_iterator(ms.len(), ms.iter().map(|&(m, n, k, c)| v.get(m, n, k, c)))
}

/// Inverse of [`to_vec`] for Hermitian vectors (the upper half is read).
pub fn from_vec(g: &Arc<Grid>, x: &DVector<Complex64>) -> SpectralField {
    let mut v = SpectralField::zeros(g);
    for (i, &(m, n, k, c)) in modes(g).iter().enumerate() {
        if (m, n) >= (0, 0) {
            v.set_mode(m, n, k, c, x[i]);
        }
    }
    v
}

/// Rows of the barotropic divergence constraint, one per nonzero wavevector.
pub fn constraint_matrix(g: &Grid) -> DMatrix<Complex64> {
    let ms = modes(g);
    let cbar: Vec<f64> = (0..g.k()).map(|k| vertical_mean(g.h(), k)).collect();
    let waves: Vec<(i64, i64)> = (-g.max_m()..=g.max_m())
        .flat_map(|m| (-g.max_n()..=g.max_n()).map(move |n| (m, n)))
        .filter(|&w| w != (0, 0))
        .collect();
    let mut c = DMatrix::from_element(waves.len(), ms.len(), ZERO);
    for (r, &(wm, wn)) in waves.iter().enumerate() {
        for (j, &(m, n, k, comp)) in ms.iter().enumerate() {
            if (m, n) == (wm, wn) {
                let dir = if comp == 0 { m } else { n } as f64;
                c[(r, j)] = Complex64::new(dir * cbar[k], 0.0);
            }
        }
    }
    c
}

/// Orthogonal projection onto the null space of the constraint, from an
/// orthonormal basis of its row space.
pub fn dense_project(v: &SpectralField) -> SpectralField {
    let g = v.grid();
    let q = constraint_matrix(g).adjoint().qr().q();
    let x = to_vec(v);
    let px = &x - &q * (q.adjoint() * &x);
    from_vec(g, &px)
}

/// Solve −Δx + ∇π = b under the constraint. The problem decouples by
/// wavevector; each block is a dense (2K+1)-square bordered system.
pub fn dense_stokes(b: &SpectralField) -> SpectralField {
    let g = b.grid();
    let kk = g.k();
    let cbar: Vec<f64> = (0..kk).map(|k| vertical_mean(g.h(), k)).collect();
    let mut out = SpectralField::zeros(g);
    for m in 0..=g.max_m() {
        for n in -g.max_n()..=g.max_n() {
            if (m, n) < (0, 0) {
                continue;
            }
            let lam = |k: usize| 4.0 * PI * PI * (m * m + n * n) as f64 + mu(g.h(), k).powi(2);
            let size = 2 * kk + 1;
            let mut a = DMatrix::from_element(size, size, ZERO);
            let mut rhs = DVector::from_element(size, ZERO);
            for k in 0..kk {
                for c in 0..2 {
                    let j = 2 * k + c;
                    a[(j, j)] = Complex64::new(lam(k), 0.0);
                    rhs[j] = b.get(m, n, k, c);
                    let dir = if c == 0 { m } else { n } as f64;
                    a[(j, 2 * kk)] = Complex64::new(dir * cbar[k], 0.0);
                    a[(2 * kk, j)] = Complex64::new(dir * cbar[k], 0.0);
                }
            }
            if (m, n) == (0, 0) {
                a[(2 * kk, 2 * kk)] = Complex64::new(1.0, 0.0);
            }
            let x = a.lu().solve(&rhs).expect("bordered block is nonsingular");
            for k in 0..kk {
                for c in 0..2 {
                    out.set_mode(m, n, k, c, x[2 * k + c]);
                }
            }
        }
    }
    out
}

/// Velocity (x, y) at a point by summing every mode.
pub fn evaluate(v: &SpectralField, x: f64, y: f64, z: f64) -> [f64; 2] {
    let g = v.grid();
    let mut out = [0.0; 2];
    for &(m, n, k, c) in &modes(g) {
        let e = Complex64::from_polar(1.0, 2.0 * PI * (m as f64 * x + n as f64 * y));
        out[c] += (v.get(m, n, k, c) * e).re * psi(g.h(), k, z);
    }
    out
}

/// ∫|v|² over the cell by a uniform horizontal rule and Gauss nodes in z.
pub fn physical_norm_sq(v: &SpectralField) -> f64 {
    let g = v.grid();
    let (px, py) = (2 * g.m(), 2 * g.n());
    let (zs, ws) = gauss(48, -g.h(), 0.0);
    let mut s = 0.0;
    for i in 0..px {
        for j in 0..py {
            for (z, w) in zs.iter().zip(&ws) {
                let u = evaluate(v, i as f64 / px as f64, j as f64 / py as f64, *z);
                s += w * (u[0] * u[0] + u[1] * u[1]);
            }
        }
    }
    s / (px * py) as f64
}

/// Galerkin projection of u·∇_H φ + w ∂_z φ with w = ∫_z^0 ∇_H·u, built from
/// point values on a 3× horizontal grid and 48 Gauss nodes in depth; w is
/// itself integrated by quadrature.
pub fn advect_oracle(u: &SpectralField, phi: &SpectralField) -> SpectralField {
    let g = u.grid().clone();
    let h = g.h();
    let kk = g.k();
    let (px, py) = (3 * g.m(), 3 * g.n());
    let waves: Vec<(i64, i64)> = (-g.max_m()..=g.max_m())
        .flat_map(|m| (-g.max_n()..=g.max_n()).map(move |n| (m, n)))
        .collect();
    let ex: Vec<Vec<Complex64>> = (0..px)
        .map(|i| waves.iter().map(|&(m, _)| Complex64::from_polar(1.0, 2.0 * PI * m as f64 * i as f64 / px as f64)).collect())
        .collect();
    let ey: Vec<Vec<Complex64>> = (0..py)
        .map(|j| waves.iter().map(|&(_, n)| Complex64::from_polar(1.0, 2.0 * PI * n as f64 * j as f64 / py as f64)).collect())
        .collect();
    let (zs, wz) = gauss(48, -h, 0.0);
    let mut acc = vec![ZERO; waves.len() * kk * 2];
    for (&z, &wq) in zs.iter().zip(&wz) {
        // column amplitudes at this depth: u_x, u_y, ∂xφ_x, ∂xφ_y, ∂yφ_x, ∂yφ_y, ∂zφ_x, ∂zφ_y, w
        let (zi, wi) = gauss(24, z, 0.0);
        let int_psi: Vec<f64> = (0..kk)
            .map(|k| zi.iter().zip(&wi).map(|(s, w)| w * psi(h, k, *s)).sum())
            .collect();
        let cols: Vec<[Complex64; 9]> = waves
            .iter()
            .map(|&(m, n)| {
                let mut col = [ZERO; 9];
                let (km, kn) = (2.0 * PI * m as f64 * I, 2.0 * PI * n as f64 * I);
                for k in 0..kk {
                    let (p, dp) = (psi(h, k, z), dpsi(h, k, z));
                    let (ux, uy) = (u.get(m, n, k, 0), u.get(m, n, k, 1));
                    col[0] += ux * p;
                    col[1] += uy * p;
                    for c in 0..2 {
                        let f = phi.get(m, n, k, c);
                        col[2 + c] += km * f * p;
                        col[4 + c] += kn * f * p;
                        col[6 + c] += f * dp;
                    }
                    col[8] += (km * ux + kn * uy) * int_psi[k];
                }
                col
            })
            .collect();
        let mut slab = vec![[0.0; 2]; px * py];
        for i in 0..px {
            for j in 0..py {
                let mut vals = [0.0; 9];
                for (wv, col) in cols.iter().enumerate() {
                    let e = ex[i][wv] * ey[j][wv];
                    for (val, a) in vals.iter_mut().zip(col) {
                        *val += (a * e).re;
                    }
                }
                for c in 0..2 {
                    slab[i * py + j][c] = vals[0] * vals[2 + c] + vals[1] * vals[4 + c] + vals[8] * vals[6 + c];
                }
            }
        }
        for (wv, _) in waves.iter().enumerate() {
            let mut coef = [ZERO; 2];
            for i in 0..px {
                for j in 0..py {
                    let e = (ex[i][wv] * ey[j][wv]).conj();
                    coef[0] += e * slab[i * py + j][0];
                    coef[1] += e * slab[i * py + j][1];
                }
            }
            for k in 0..kk {
                let p = wq * psi(h, k, z) / (px * py) as f64;
                for c in 0..2 {
                    acc[(wv * kk + k) * 2 + c] += coef[c] * p;
                }
            }
        }
    }
    let mut out = SpectralField::zeros(&g);
    for (wv, &(m, n)) in waves.iter().enumerate() {
        if (m, n) >= (0, 0) {
            for k in 0..kk {
                for c in 0..2 {
                    out.set_mode(m, n, k, c, acc[(wv * kk + k) * 2 + c]);
                }
            }
        }
    }
    out
}

/// Closed-form complex amplitude C of e^{iωt} in each forced coefficient of
/// the periodic response, C = (A/4) e^{i·phase}/(λ+iω), keyed by the
/// upper-half-plane mode (m, n, k, c).
pub fn harmonic_response(fs: &ForcingSpec, g: &Grid) -> Vec<((i64, i64, usize, usize), Complex64)> {
    let period = fs.period.expect("periodic forcing");
    let mut out = Vec::new();
    for md in &fs.modes {
        let k = match md.profile {
            Profile::Sine { k } => k,
            p => panic!("closed form needs a sine profile, got {p:?}"),
        };
        assert!(md.m > 0 || (md.m == 0 && md.n > 0), "use the upper half plane");
        let lam = 4.0 * PI * PI * (md.m * md.m + md.n * md.n) as f64 + mu(g.h(), k).powi(2);
        let omega = 2.0 * PI * md.q as f64 / period;
        for c in 0..2 {
            let a = Complex64::new(md.amplitude[c][0], md.amplitude[c][1]);
            if a.norm() > 0.0 {
                let resp = a * 0.25 * Complex64::from_polar(1.0, md.phase) / Complex64::new(lam, omega);
                out.push(((md.m, md.n, k, c), resp));
            }
        }
    }
    out
}

pub fn bit_equal(a: &SpectralField, b: &SpectralField) -> bool {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
}
