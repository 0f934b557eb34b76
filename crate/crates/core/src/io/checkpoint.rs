//! Binary checkpoints.
//!
//! Layout (little endian): `"HPE1"`, version `u32`, `M`, `N`, `K` as `u32`,
//! `h` and `t` as `f64`, then `(re, im)` pairs over the non-redundant
//! Hermitian half: `m = 0..=M/2-1` outermost; `n = 0..=N/2-1` when `m = 0`,
//! otherwise `n = -(N/2-1)..=N/2-1`; then `k`, then the component.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{HpeError, Result};
use crate::field::SpectralField;
use crate::grid::{make_grid, Grid};
use crate::integrator::State;

pub const MAGIC: &[u8; 4] = b"HPE1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 * 4 + 2 * 8;

fn half_modes(g: &Grid) -> impl Iterator<Item = (i64, i64)> + '_ {
    let (mm, nn) = (g.max_m(), g.max_n());
    (0..=mm).flat_map(move |m| {
        let lo = if m == 0 { 0 } else { -nn };
        (lo..=nn).map(move |n| (m, n))
    })
}

/// Serialize the state's coefficients and time.
pub fn encode(state: &State) -> Vec<u8> {
    let g = state.v.grid();
    let count = half_modes(g).count() * g.k() * 2;
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [g.m(), g.n(), g.k()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.h().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    let data = state.v.as_slice();
    for (m, n) in half_modes(g) {
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        for a in &data[base..base + 2 * g.k()] {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
    }
    out
}

/// Header fields of a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub h: f64,
    pub t: f64,
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(HpeError::Checkpoint(format!("file too short for a header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(HpeError::Checkpoint("bad magic, not an HPE1 checkpoint".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(HpeError::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    Ok(CheckpointHeader {
        m: u32_at(bytes, 8) as usize,
        n: u32_at(bytes, 12) as usize,
        k: u32_at(bytes, 16) as usize,
        h: f64_at(bytes, 20),
        t: f64_at(bytes, 28),
    })
}

/// Rebuild a state, on `grid` when given (it must match the header).
pub fn decode(bytes: &[u8], grid: Option<&Arc<Grid>>) -> Result<State> {
    let hd = decode_header(bytes)?;
    let g = match grid {
        Some(g) => {
            if g.m() != hd.m || g.n() != hd.n || g.k() != hd.k || g.h().to_bits() != hd.h.to_bits() {
                return Err(HpeError::Checkpoint(format!(
                    "checkpoint is {}x{}x{} (h = {}), grid is {}x{}x{} (h = {})",
                    hd.m,
                    hd.n,
                    hd.k,
                    hd.h,
                    g.m(),
                    g.n(),
                    g.k(),
                    g.h()
                )));
            }
            g.clone()
        }
        None => make_grid(hd.m, hd.n, hd.k, hd.h, None).map_err(|e| HpeError::Checkpoint(e.to_string()))?,
    };
    let count = half_modes(&g).count() * g.k() * 2;
    let expected = HEADER_LEN + 16 * count;
    if bytes.len() != expected {
        return Err(HpeError::Checkpoint(format!(
            "expected {expected} bytes for {}x{}x{}, found {}",
            hd.m,
            hd.n,
            hd.k,
            bytes.len()
        )));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); g.len()];
    let mut at = HEADER_LEN;
    for (m, n) in half_modes(&g) {
        let base = g.idx(g.im(m), g.in_(n), 0, 0);
        let partner = g.idx(g.im(-m), g.in_(-n), 0, 0);
        for j in 0..2 * g.k() {
            let a = Complex64::new(f64_at(bytes, at), f64_at(bytes, at + 8));
            at += 16;
            data[base + j] = a;
            if (m, n) != (0, 0) {
                data[partner + j] = a.conj();
            }
        }
    }
    let v = SpectralField::from_raw(&g, data);
    if !v.is_finite() {
        return Err(HpeError::Checkpoint("non-finite coefficients".into()));
    }
    Ok(State::new(v, hd.t))
}

/// Write `state` to `path` (through a temporary file, so a failed write
/// never leaves a partial checkpoint under the final name).
pub fn save_checkpoint(state: &State, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(state))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Load a checkpoint onto a fresh grid with the default `Q = 2K`.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<State> {
    decode(&std::fs::read(path)?, None)
}

/// Load a checkpoint onto an existing grid.
pub fn load_checkpoint_on(path: impl AsRef<Path>, grid: &Arc<Grid>) -> Result<State> {
    decode(&std::fs::read(path)?, Some(grid))
}
