//! Declarative time-periodic (or steady) forcing and its basis projection.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HpeError, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::quadrature::integrate;

/// Vertical shape of one forcing mode, as a function of z ∈ (−h, 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// The basis profile ψ̂_k.
    Sine { k: usize },
    /// 1.
    Constant,
    /// ((z + h)/h)^degree.
    Monomial { degree: u32 },
}

/// Highest monomial degree accepted.
pub const MAX_MONOMIAL_DEGREE: u32 = 12;

/// One term `profile(z) · Re[A_c e^{2πi(mx+ny)}] · cos(2πq t/T + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingMode {
    pub m: i64,
    pub n: i64,
    pub profile: Profile,
    /// Complex amplitude per component as `[[re, im], [re, im]]` for (x, y).
    pub amplitude: [[f64; 2]; 2],
    #[serde(default)]
    pub q: u32,
    #[serde(default)]
    pub phase: f64,
}

/// A finite mode sum. `period` is required unless `steady` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default)]
    pub steady: bool,
    pub modes: Vec<ForcingMode>,
}

/// Names accepted by [`ForcingSpec::preset`].
pub const PRESETS: &[&str] = &["channel", "channel_steady", "shear_pair", "constant_norm", "none"];

fn mode(m: i64, n: i64, profile: Profile, c: usize, amp: f64, q: u32, phase: f64) -> ForcingMode {
    let mut amplitude = [[0.0; 2]; 2];
    amplitude[c][0] = amp;
    ForcingMode {
        m,
        n,
        profile,
        amplitude,
        q,
        phase,
    }
}

impl ForcingSpec {
    pub fn zero(period: Option<f64>) -> Self {
        ForcingSpec {
            period,
            steady: period.is_none(),
            modes: Vec::new(),
        }
    }

    /// Canonical forcings, scaled by `amplitude`.
    ///
    /// * `channel`: three modes mixing sine, shifted-phase and depth-uniform profiles, q = 1.
    /// * `channel_steady`: the same spatial pattern without time dependence.
    /// * `shear_pair`: the two sine modes of `channel` only.
    /// * `constant_norm`: two orthogonal modes in quadrature, so ‖f(t)‖₂ is constant.
    /// * `none`: zero forcing.
    pub fn preset(name: &str, period: f64, amplitude: f64) -> Result<Self> {
        let a = amplitude;
        let (modes, steady) = match name {
            "channel" => (channel_modes(a, 1), false),
            "channel_steady" => (channel_modes(a, 0), true),
            "shear_pair" => (channel_modes(a, 1)[..2].to_vec(), false),
            "constant_norm" => (
                vec![
                    mode(0, 1, Profile::Sine { k: 0 }, 0, a, 1, 0.0),
                    mode(1, 0, Profile::Sine { k: 0 }, 1, a, 1, -PI / 2.0),
                ],
                false,
            ),
            "none" => (Vec::new(), false),
            _ => {
                return Err(HpeError::validation(
                    "forcing.preset",
                    format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")),
                ))
            }
        };
        Ok(ForcingSpec {
            period: if steady { None } else { Some(period) },
            steady,
            modes,
        })
    }

    /// Multiply every amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for md in &mut out.modes {
            for c in &mut md.amplitude {
                c[0] *= s;
                c[1] *= s;
            }
        }
        out
    }

    /// Structural checks that do not depend on a grid.
    pub fn validate(&self) -> Result<()> {
        if !self.steady {
            match self.period {
                Some(t) if t.is_finite() && t > 0.0 => {}
                _ => return Err(HpeError::validation("forcing.period", "periodic forcing needs period > 0")),
            }
        }
        for (i, md) in self.modes.iter().enumerate() {
            if self.steady && md.q != 0 {
                return Err(HpeError::validation(
                    format!("forcing.modes[{i}].q"),
                    "steady forcing cannot carry a temporal harmonic",
                ));
            }
            if let Profile::Monomial { degree } = md.profile {
                if degree > MAX_MONOMIAL_DEGREE {
                    return Err(HpeError::validation(
                        format!("forcing.modes[{i}].profile"),
                        format!("monomial degree {degree} exceeds {MAX_MONOMIAL_DEGREE}"),
                    ));
                }
            }
            let finite = md.amplitude.iter().flatten().all(|x| x.is_finite()) && md.phase.is_finite();
            if !finite {
                return Err(HpeError::validation(format!("forcing.modes[{i}]"), "non-finite amplitude or phase"));
            }
        }
        Ok(())
    }

    /// Reject modes the grid cannot represent.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        for (i, md) in self.modes.iter().enumerate() {
            if let Some(msg) = mode_misfit(md, grid) {
                return Err(HpeError::validation(format!("forcing.modes[{i}]"), msg));
            }
        }
        Ok(())
    }

    /// Period of the time dependence (None when steady).
    pub fn period(&self) -> Option<f64> {
        if self.steady {
            None
        } else {
            self.period
        }
    }
}

fn channel_modes(a: f64, q: u32) -> Vec<ForcingMode> {
    vec![
        mode(0, 1, Profile::Sine { k: 0 }, 0, a, q, 0.0),
        mode(1, 0, Profile::Sine { k: 1 }, 1, a, q, PI / 2.0),
        mode(1, 1, Profile::Constant, 0, 0.5 * a, q, 0.0),
    ]
}

fn mode_misfit(md: &ForcingMode, grid: &Grid) -> Option<String> {
    if !grid.contains_mode(md.m, md.n) {
        return Some(format!(
            "mode (m={}, n={}) outside the resolved range |m| <= {}, |n| <= {}",
            md.m,
            md.n,
            grid.max_m(),
            grid.max_n()
        ));
    }
    if let Profile::Sine { k } = md.profile {
        if k >= grid.k() {
            return Some(format!("vertical mode k={k} outside 0..{}", grid.k()));
        }
    }
    None
}

/// `∫_{-h}^0 profile(z) ψ̂_k(z) dz` for every k of the grid.
pub fn profile_coefficients(profile: Profile, grid: &Grid) -> Vec<f64> {
    let h = grid.h();
    let norm = (2.0 / h).sqrt();
    (0..grid.k())
        .map(|k| {
            let mu = grid.mu()[k];
            match profile {
                Profile::Sine { k: j } => {
                    if j == k {
                        1.0
                    } else {
                        0.0
                    }
                }
                Profile::Constant => norm / mu,
                Profile::Monomial { degree } => {
                    // The integration-by-parts recurrence amplifies rounding by
                    // d!/(μh)^d, so integrate directly: each panel spans at most
                    // about one wavelength of ψ̂_k.
                    norm * integrate(
                        |s| (s / h).powi(degree as i32) * (mu * s).sin(),
                        0.0,
                        h,
                        k + 2,
                        24,
                    )
                }
            }
        })
        .collect()
}

struct CompiledMode {
    omega: f64,
    phase: f64,
    coeffs: Vec<(usize, Complex64)>,
}

/// A forcing spec bound to a grid: sparse spatial coefficients and temporal
/// factors, evaluated cheaply at every stage of every step.
pub struct CompiledForcing {
    grid: Arc<Grid>,
    period: Option<f64>,
    modes: Vec<CompiledMode>,
    /// Human-readable notes on modes dropped because the grid cannot hold them.
    pub truncated: Vec<String>,
}

impl CompiledForcing {
    pub fn new(spec: &ForcingSpec, grid: &Arc<Grid>) -> Result<Self> {
        spec.validate()?;
        let g = grid.clone();
        let period = spec.period();
        let mut modes = Vec::new();
        let mut truncated = Vec::new();
        for (i, md) in spec.modes.iter().enumerate() {
            if let Some(msg) = mode_misfit(md, &g) {
                log::warn!("forcing mode {i} truncated: {msg}");
                truncated.push(format!("modes[{i}]: {msg}"));
                continue;
            }
            let prof = profile_coefficients(md.profile, &g);
            let mut coeffs = Vec::new();
            for c in 0..2 {
                let a = Complex64::new(md.amplitude[c][0], md.amplitude[c][1]);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (k, p) in prof.iter().enumerate() {
                    if *p == 0.0 {
                        continue;
                    }
                    if md.m == 0 && md.n == 0 {
                        coeffs.push((g.idx(0, 0, k, c), Complex64::new(a.re * p, 0.0)));
                    } else {
                        let half = a * (0.5 * p);
                        coeffs.push((g.idx(g.im(md.m), g.in_(md.n), k, c), half));
                        coeffs.push((g.idx(g.im(-md.m), g.in_(-md.n), k, c), half.conj()));
                    }
                }
            }
            let omega = match period {
                Some(t) => 2.0 * PI * md.q as f64 / t,
                None => 0.0,
            };
            modes.push(CompiledMode {
                omega,
                phase: md.phase,
                coeffs,
            });
        }
        Ok(CompiledForcing {
            grid: g,
            period,
            modes,
            truncated,
        })
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.coeffs.is_empty())
    }

    /// Largest temporal frequency present.
    pub fn max_omega(&self) -> f64 {
        self.modes.iter().fold(0.0, |w, m| w.max(m.omega.abs()))
    }

    /// Projection of f(t) onto the basis.
    pub fn eval(&self, t: f64) -> SpectralField {
        let mut out = SpectralField::zeros(&self.grid);
        self.eval_into(t, &mut out);
        out
    }

    pub(crate) fn eval_into(&self, t: f64, out: &mut SpectralField) {
        let data = out.as_mut_slice();
        data.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
        let tr = match self.period {
            Some(p) => t.rem_euclid(p),
            None => 0.0,
        };
        for md in &self.modes {
            let tau = (md.omega * tr + md.phase).cos();
            for (i, c) in &md.coeffs {
                data[*i] += c * tau;
            }
        }
    }

    /// ‖f(t)‖₂ of the projected forcing.
    pub fn norm(&self, t: f64) -> f64 {
        self.eval(t).norm()
    }
}

/// Projection of f(t) onto the grid's basis. Modes outside the grid are
/// dropped with a logged warning.
pub fn forcing_eval(fs: &ForcingSpec, t: f64, grid: &Arc<Grid>) -> Result<SpectralField> {
    Ok(CompiledForcing::new(fs, grid)?.eval(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::X;
    use crate::grid::make_grid;

    #[test]
    fn steady_is_time_independent() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let fs = ForcingSpec::preset("channel_steady", 1.0, 2.0).unwrap();
        let f0 = forcing_eval(&fs, 0.0, &g).unwrap();
        for t in [0.1, 3.7, -2.0, 1e6] {
            assert_eq!(forcing_eval(&fs, t, &g).unwrap(), f0);
        }
        assert!(f0.norm() > 0.0);
    }

    #[test]
    fn harmonic_forcing_is_periodic() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let fs = ForcingSpec::preset("channel", 2.0, 1.0).unwrap();
        let cf = CompiledForcing::new(&fs, &g).unwrap();
        for t in [0.0, 0.25, 0.375, 1.5, 1.75] {
            assert_eq!(cf.eval(t + 2.0), cf.eval(t));
            assert_eq!(cf.eval(t + 6.0), cf.eval(t));
        }
    }

    #[test]
    fn constant_profile_integrals() {
        let g = make_grid(2, 2, 6, 1.0, None).unwrap();
        let c = profile_coefficients(Profile::Constant, &g);
        for (k, ck) in c.iter().enumerate() {
            let expect = 2f64.sqrt() * 2.0 / ((2 * k + 1) as f64 * PI);
            assert!((ck - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn monomial_integrals_match_quadrature() {
        let g = make_grid(2, 2, 8, 1.7, None).unwrap();
        for d in 0..=MAX_MONOMIAL_DEGREE {
            let c = profile_coefficients(Profile::Monomial { degree: d }, &g);
            for k in 0..8 {
                let exact = integrate(
                    |z| ((z + 1.7) / 1.7f64).powi(d as i32) * g.psi(k, z),
                    -1.7,
                    0.0,
                    16,
                    20,
                );
                assert!((c[k] - exact).abs() < 1e-12, "d={d} k={k}: {} vs {exact}", c[k]);
            }
        }
    }

    #[test]
    fn low_degree_monomials_closed_form() {
        let g = make_grid(2, 2, 6, 1.3, None).unwrap();
        let c0 = profile_coefficients(Profile::Monomial { degree: 0 }, &g);
        let c1 = profile_coefficients(Profile::Monomial { degree: 1 }, &g);
        let cc = profile_coefficients(Profile::Constant, &g);
        let norm = (2.0 / 1.3f64).sqrt();
        for k in 0..6 {
            let mu = g.mu()[k];
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((c0[k] - cc[k]).abs() < 1e-15);
            assert!((c1[k] - norm * sign / (1.3 * mu * mu)).abs() < 1e-14);
        }
    }

    #[test]
    fn real_part_convention() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let fs = ForcingSpec {
            period: Some(1.0),
            steady: false,
            modes: vec![mode(1, 0, Profile::Sine { k: 1 }, 0, 2.0, 1, 0.0)],
        };
        let f = forcing_eval(&fs, 0.0, &g).unwrap();
        assert_eq!(f.get(1, 0, 1, X), Complex64::new(1.0, 0.0));
        assert_eq!(f.get(-1, 0, 1, X), Complex64::new(1.0, 0.0));
        let fq = forcing_eval(&fs, 0.25, &g).unwrap();
        assert!(fq.norm() < 1e-15);
    }

    #[test]
    fn constant_norm_preset() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let cf = CompiledForcing::new(&ForcingSpec::preset("constant_norm", 1.0, 3.0).unwrap(), &g).unwrap();
        let f0 = cf.norm(0.0);
        for t in [0.1, 0.33, 0.9] {
            assert!((cf.norm(t) - f0).abs() < 1e-14);
        }
        assert!((f0 - 3.0 / 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn out_of_grid_modes_are_truncated_or_rejected() {
        let g = make_grid(8, 8, 2, 1.0, None).unwrap();
        let fs = ForcingSpec {
            period: Some(1.0),
            steady: false,
            modes: vec![mode(9, 0, Profile::Constant, 0, 1.0, 1, 0.0)],
        };
        let cf = CompiledForcing::new(&fs, &g).unwrap();
        assert_eq!(cf.truncated.len(), 1);
        assert!(cf.is_zero());
        let err = fs.check_grid(&g).unwrap_err().to_string();
        assert!(err.contains("m=9"), "{err}");
    }

    #[test]
    fn unknown_preset_and_bad_period() {
        assert!(ForcingSpec::preset("tidal", 1.0, 1.0).is_err());
        let mut fs = ForcingSpec::preset("channel", 1.0, 1.0).unwrap();
        fs.period = Some(0.0);
        assert!(fs.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let fs = ForcingSpec::preset("channel", 1.0, 1.0).unwrap();
        let s = serde_json::to_string(&fs).unwrap();
        let back: ForcingSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, fs);
        let bad = r#"{"period":1.0,"modes":[],"extra":1}"#;
        assert!(serde_json::from_str::<ForcingSpec>(bad).is_err());
    }
}
