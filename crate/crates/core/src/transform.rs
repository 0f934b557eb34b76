//! Spectral ↔ physical transforms.
//!
//! Horizontal directions use 3/2-padded complex FFTs; two real fields travel
//! through one complex transform (`A + iB`). Vertical synthesis and analysis
//! are small dense matrix products against the precomputed profile tables.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{HpeError, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Physical sampling layout with cached FFT plans. Level buffers are stored
/// spectral-side as `[z][i_m][i_n]` and physical-side as `[z][j_y][i_x]`.
pub(crate) struct PhysLayout {
    pub(crate) pad_m: usize,
    pub(crate) pad_n: usize,
    pub(crate) nz: usize,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl PhysLayout {
    pub(crate) fn new(pad_m: usize, pad_n: usize, nz: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_m = planner.plan_fft_forward(pad_m);
        let inv_m = planner.plan_fft_inverse(pad_m);
        let fwd_n = planner.plan_fft_forward(pad_n);
        let inv_n = planner.plan_fft_inverse(pad_n);
        let scratch_len = [&fwd_m, &inv_m, &fwd_n, &inv_n]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        PhysLayout {
            pad_m,
            pad_n,
            nz,
            fwd_m,
            inv_m,
            fwd_n,
            inv_n,
            scratch_len,
        }
    }

    #[inline]
    fn level_len(&self) -> usize {
        self.pad_m * self.pad_n
    }

    /// Padded row index of wavenumber m.
    #[inline]
    fn pm(&self, m: i64) -> usize {
        m.rem_euclid(self.pad_m as i64) as usize
    }
    #[inline]
    fn pn(&self, n: i64) -> usize {
        n.rem_euclid(self.pad_n as i64) as usize
    }

    /// Build the packed physical samples of `A + iB` where the spectral
    /// coefficients of the pair are supplied column by column: `fill(im, in, col)`
    /// writes the K profile coefficients `Â + iB̂` of wavevector (im, in).
    /// `vert` is the `[z][k]` profile table (nz × K).
    pub(crate) fn synth<F>(&self, g: &Grid, vert: &[f64], fill: F) -> Vec<Complex64>
    where
        F: Fn(usize, usize, &mut [Complex64]),
    {
        let kk = g.k();
        debug_assert_eq!(vert.len(), self.nz * kk);
        let ll = self.level_len();
        let (mm, nn) = (g.max_m(), g.max_n());
        let offsets = self.column_offsets(mm, nn);
        let ncol = offsets.len();
        // coefficients as a [k][column] matrix so the inner loops run over
        // contiguous columns
        let mut coef = vec![ZERO; kk * ncol];
        let mut col = vec![ZERO; kk];
        let mut c = 0;
        for m in -mm..=mm {
            let im = g.im(m);
            for n in -nn..=nn {
                fill(im, g.in_(n), &mut col);
                for k in 0..kk {
                    coef[k * ncol + c] = col[k];
                }
                c += 1;
            }
        }
        let mut buf = vec![ZERO; self.nz * ll];
        let mut row = vec![ZERO; ncol];
        for z in 0..self.nz {
            row.iter_mut().for_each(|r| *r = ZERO);
            for k in 0..kk {
                let t = vert[z * kk + k];
                for (r, a) in row.iter_mut().zip(&coef[k * ncol..(k + 1) * ncol]) {
                    *r += a * t;
                }
            }
            let level = &mut buf[z * ll..(z + 1) * ll];
            for (off, r) in offsets.iter().zip(&row) {
                level[*off] = *r;
            }
        }
        self.inverse_levels(&mut buf, mm as usize);
        buf
    }

    /// Offsets within a level of the active wavevectors, m outer, n inner.
    fn column_offsets(&self, mm: i64, nn: i64) -> Vec<usize> {
        let mut out = Vec::with_capacity(((2 * mm + 1) * (2 * nn + 1)) as usize);
        for m in -mm..=mm {
            for n in -nn..=nn {
                out.push(self.pm(m) * self.pad_n + self.pn(n));
            }
        }
        out
    }

    /// Horizontal inverse FFT level by level, spectral layout in, physical out.
    fn inverse_levels(&self, buf: &mut [Complex64], max_m: usize) {
        let (pm, pn) = (self.pad_m, self.pad_n);
        self.per_level(buf, |level, tmp, scratch| {
            // along n, only rows carrying active m
            self.inv_n
                .process_with_scratch(&mut level[..(max_m + 1) * pn], scratch);
            if max_m > 0 {
                self.inv_n
                    .process_with_scratch(&mut level[(pm - max_m) * pn..], scratch);
            }
            transpose(level, tmp, pm, pn);
            self.inv_m.process_with_scratch(tmp, scratch);
            level.copy_from_slice(tmp);
        });
    }

    /// Run `f(level, tmp, scratch)` on every level, in parallel when more than
    /// one worker is available. Levels are independent, so results do not
    /// depend on the schedule.
    fn per_level<F>(&self, buf: &mut [Complex64], f: F)
    where
        F: Fn(&mut [Complex64], &mut [Complex64], &mut [Complex64]) + Sync,
    {
        let ll = self.level_len();
        if rayon::current_num_threads() <= 1 {
            let mut tmp = vec![ZERO; ll];
            let mut scratch = vec![ZERO; self.scratch_len];
            for level in buf.chunks_exact_mut(ll) {
                f(level, &mut tmp, &mut scratch);
            }
        } else {
            buf.par_chunks_mut(ll).for_each_init(
                || (vec![ZERO; ll], vec![ZERO; self.scratch_len]),
                |(tmp, scratch), level| f(level, tmp, scratch),
            );
        }
    }

    /// Horizontal forward FFT level by level, physical layout in, spectral out
    /// (unnormalized).
    fn forward_levels(&self, buf: &mut [Complex64]) {
        let (pm, pn) = (self.pad_m, self.pad_n);
        self.per_level(buf, |level, tmp, scratch| {
            self.fwd_m.process_with_scratch(level, scratch);
            transpose(level, tmp, pn, pm);
            self.fwd_n.process_with_scratch(tmp, scratch);
            level.copy_from_slice(tmp);
        });
    }

    /// Inverse of [`synth`](Self::synth): forward FFT, unpack the pair and
    /// project vertically with the `[k][z]` matrix `proj`. `store(im, in, a, b)`
    /// receives the K coefficients of each of the two real fields.
    pub(crate) fn analyze<F>(&self, g: &Grid, buf: &mut [Complex64], proj: &[f64], mut store: F)
    where
        F: FnMut(usize, usize, &[Complex64], &[Complex64]),
    {
        let kk = g.k();
        debug_assert_eq!(proj.len(), self.nz * kk);
        debug_assert_eq!(buf.len(), self.nz * self.level_len());
        self.forward_levels(buf);
        let ll = self.level_len();
        let norm = 0.5 / ll as f64;
        let (mm, nn) = (g.max_m(), g.max_n());
        let offsets = self.column_offsets(mm, nn);
        let ncol = offsets.len();
        // column c pairs with its conjugate partner ncol-1-c
        let mut acc_a = vec![ZERO; kk * ncol];
        let mut acc_b = vec![ZERO; kk * ncol];
        let mut az = vec![ZERO; ncol];
        let mut bz = vec![ZERO; ncol];
        for z in 0..self.nz {
            let level = &buf[z * ll..(z + 1) * ll];
            for c in 0..ncol {
                let x = level[offsets[c]];
                let xc = level[offsets[ncol - 1 - c]].conj();
                az[c] = (x + xc) * norm;
                // (x - xc) / 2i
                let d = (x - xc) * norm;
                bz[c] = Complex64::new(d.im, -d.re);
            }
            for k in 0..kk {
                let p = proj[k * self.nz + z];
                for (a, s) in acc_a[k * ncol..(k + 1) * ncol].iter_mut().zip(&az) {
                    *a += s * p;
                }
                for (b, s) in acc_b[k * ncol..(k + 1) * ncol].iter_mut().zip(&bz) {
                    *b += s * p;
                }
            }
        }
        let mut ak = vec![ZERO; kk];
        let mut bk = vec![ZERO; kk];
        let mut c = 0;
        for m in -mm..=mm {
            for n in -nn..=nn {
                for k in 0..kk {
                    ak[k] = acc_a[k * ncol + c];
                    bk[k] = acc_b[k * ncol + c];
                }
                store(g.im(m), g.in_(n), &ak, &bk);
                c += 1;
            }
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Real samples of both velocity components on a padded horizontal grid times a
/// set of vertical nodes (the grid's quadrature nodes unless built by
/// [`sample_at`]).
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: Arc<Grid>,
    pad_m: usize,
    pad_n: usize,
    z: Vec<f64>,
    /// `[c][z][j][i]`
    values: Vec<f64>,
}

impl PhysicalField {
    /// All-zero samples on the grid's own padded layout and quadrature nodes.
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        let (pm, pn, q) = (grid.pad_m(), grid.pad_n(), grid.q());
        PhysicalField {
            grid: grid.clone(),
            pad_m: pm,
            pad_n: pn,
            z: grid.zq().to_vec(),
            values: vec![0.0; 2 * pm * pn * q],
        }
    }

    /// Build from a function of (x, y, z) evaluated at every sample point.
    pub fn from_fn<F: Fn(f64, f64, f64) -> [f64; 2]>(grid: &Arc<Grid>, f: F) -> Self {
        let mut p = PhysicalField::zeros(grid);
        for q in 0..p.nz() {
            let z = p.z[q];
            for j in 0..p.pad_n {
                let y = j as f64 / p.pad_n as f64;
                for i in 0..p.pad_m {
                    let x = i as f64 / p.pad_m as f64;
                    let v = f(x, y, z);
                    p.set(0, i, j, q, v[0]);
                    p.set(1, i, j, q, v[1]);
                }
            }
        }
        p
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.pad_m, self.pad_n, self.z.len())
    }
    pub fn nz(&self) -> usize {
        self.z.len()
    }
    /// Vertical sample positions.
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    #[inline]
    fn offset(&self, c: usize, i: usize, j: usize, q: usize) -> usize {
        ((c * self.z.len() + q) * self.pad_n + j) * self.pad_m + i
    }
    /// Sample of component c at x = i/padM, y = j/padN, z = z[q].
    #[inline]
    pub fn value(&self, c: usize, i: usize, j: usize, q: usize) -> f64 {
        self.values[self.offset(c, i, j, q)]
    }
    #[inline]
    pub fn set(&mut self, c: usize, i: usize, j: usize, q: usize, v: f64) {
        let o = self.offset(c, i, j, q);
        self.values[o] = v;
    }
    /// Raw samples of component c, ordered `[z][j][i]`.
    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.values.len() / 2;
        &self.values[c * len..(c + 1) * len]
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_packed(grid: &Arc<Grid>, layout: &PhysLayout, z: Vec<f64>, buf: &[Complex64]) -> Self {
        let len = buf.len();
        let mut values = vec![0.0; 2 * len];
        for (i, c) in buf.iter().enumerate() {
            values[i] = c.re;
            values[len + i] = c.im;
        }
        PhysicalField {
            grid: grid.clone(),
            pad_m: layout.pad_m,
            pad_n: layout.pad_n,
            z,
            values,
        }
    }

    fn packed(&self) -> Vec<Complex64> {
        let len = self.values.len() / 2;
        (0..len)
            .map(|i| Complex64::new(self.values[i], self.values[len + i]))
            .collect()
    }
}

/// Column filler packing `a_x + i a_y` of a spectral field.
pub(crate) fn pack_xy<'a>(v: &'a SpectralField) -> impl Fn(usize, usize, &mut [Complex64]) + 'a {
    let g = v.grid().clone();
    let a = v.as_slice();
    move |im, in_, col| {
        for (k, slot) in col.iter_mut().enumerate() {
            let i = g.idx(im, in_, k, 0);
            *slot = a[i] + Complex64::new(-a[i + 1].im, a[i + 1].re);
        }
    }
}

/// Evaluate v on the padded horizontal grid at the quadrature nodes.
pub fn to_physical(v: &SpectralField) -> PhysicalField {
    let g = v.grid();
    let buf = g.layout.synth(g, &g.sin_eval, pack_xy(v));
    PhysicalField::from_packed(g, &g.layout, g.zq().to_vec(), &buf)
}

fn analyze_into(p: &PhysicalField, proj: &[f64]) -> Result<SpectralField> {
    let g = p.grid.clone();
    if p.shape() != (g.pad_m(), g.pad_n(), g.q()) || p.z.as_slice() != g.zq() {
        return Err(HpeError::ShapeMismatch(format!(
            "physical field {:?} does not match grid layout {:?}",
            p.shape(),
            (g.pad_m(), g.pad_n(), g.q())
        )));
    }
    let mut buf = p.packed();
    let mut out = SpectralField::zeros(&g);
    {
        let data = out.as_mut_slice();
        g.layout.analyze(&g, &mut buf, proj, |im, in_, ax, ay| {
            for k in 0..g.k() {
                let i = g.idx(im, in_, k, 0);
                data[i] = ax[k];
                data[i + 1] = ay[k];
            }
        });
    }
    Ok(out)
}

/// Quadrature projection onto the basis (exact on the resolved span).
pub fn to_spectral(p: &PhysicalField) -> Result<SpectralField> {
    analyze_into(p, &p.grid.quad_proj)
}

/// Projection of samples whose vertical dependence is a cosine series
/// `Σ_{p<Q} g_p cos(pπ(z+h)/h)`, such as products of two resolved fields.
/// Exact where [`to_spectral`] is only second-order.
pub fn to_spectral_products(p: &PhysicalField) -> Result<SpectralField> {
    analyze_into(p, &p.grid.prod_proj)
}

/// Evaluate v at arbitrary vertical positions on a `pad_m × pad_n` horizontal
/// grid (each at least the grid's M and N).
pub fn sample_at(v: &SpectralField, pad_m: usize, pad_n: usize, z: &[f64]) -> Result<PhysicalField> {
    let g = v.grid();
    if pad_m < g.m() || pad_n < g.n() || z.is_empty() {
        return Err(HpeError::ShapeMismatch(format!(
            "sampling grid {pad_m}x{pad_n}x{} too small for {}x{}",
            z.len(),
            g.m(),
            g.n()
        )));
    }
    let layout = PhysLayout::new(pad_m, pad_n, z.len());
    let vert = profile_table(g, z, false);
    let buf = layout.synth(g, &vert, pack_xy(v));
    Ok(PhysicalField::from_packed(g, &layout, z.to_vec(), &buf))
}

/// `[z][k]` table of ψ̂_k(z), or of √(2/h)cos(μ_k(z+h)) when `cosine` is set.
pub(crate) fn profile_table(g: &Grid, z: &[f64], cosine: bool) -> Vec<f64> {
    let kk = g.k();
    let norm = (2.0 / g.h()).sqrt();
    let mut out = vec![0.0; z.len() * kk];
    for (j, zj) in z.iter().enumerate() {
        for k in 0..kk {
            let arg = g.mu()[k] * (zj + g.h());
            out[j * kk + k] = norm * if cosine { arg.cos() } else { arg.sin() };
        }
    }
    out
}
