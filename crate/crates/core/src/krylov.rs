//! Restarted GMRES over spectral fields with the real inner product.

use crate::error::Result;
use crate::SpectralField;

/// Outcome of a GMRES solve. `residual` is relative to ‖b‖.
#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: SpectralField,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Solve `A x = b` with right preconditioning: GMRES runs on `A M⁻¹ y = b`
/// and returns `x = M⁻¹ y`. Starts from zero.
pub fn gmres<A, P>(
    mut apply: A,
    mut precond: P,
    b: &SpectralField,
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome>
where
    A: FnMut(&SpectralField) -> Result<SpectralField>,
    P: FnMut(&SpectralField) -> SpectralField,
{
    let restart = restart.max(1);
    let bnorm = b.norm();
    let mut x = SpectralField::zeros(b.grid());
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let target = rtol * bnorm;
    let mut r = b.clone();
    let mut beta = bnorm;
    let mut total = 0;
    loop {
        let mut basis: Vec<SpectralField> = vec![r.scaled(1.0 / beta)];
        let mut precond_basis: Vec<SpectralField> = Vec::with_capacity(restart);
        let mut hess: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<f64> = Vec::with_capacity(restart);
        let mut g = vec![beta];
        let mut resid = beta;
        for j in 0..restart {
            let z = precond(&basis[j]);
            let mut w = apply(&z)?;
            precond_basis.push(z);
            let mut col = vec![0.0; j + 2];
            // modified Gram–Schmidt, twice for robustness
            for _ in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let hij = w.inner(vi);
                    col[i] += hij;
                    w.axpy(-hij, vi);
                }
            }
            let wn = w.norm();
            col[j + 1] = wn;
            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i] * a + cs[i] * bb;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            resid = g[j + 1].abs();
            hess.push(col);
            total += 1;
            if resid <= target || total >= max_iter || wn == 0.0 {
                break;
            }
            basis.push(w.scaled(1.0 / wn));
        }
        let m = hess.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for l in i + 1..m {
                acc -= hess[l][i] * y[l];
            }
            y[i] = if hess[i][i] == 0.0 { 0.0 } else { acc / hess[i][i] };
        }
        for (yi, zi) in y.iter().zip(&precond_basis) {
            x.axpy(*yi, zi);
        }
        if resid <= target || total >= max_iter {
            // the recurrence estimate; confirm with a true residual
            let ax = apply(&x)?;
            let true_res = b.sub(&ax).norm();
            return Ok(GmresOutcome {
                x,
                iterations: total,
                residual: true_res / bnorm,
                converged: true_res <= 2.0 * target,
            });
        }
        let ax = apply(&x)?;
        r = b.sub(&ax);
        beta = r.norm();
        if beta <= target {
            return Ok(GmresOutcome {
                x,
                iterations: total,
                residual: beta / bnorm,
                converged: true,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn solves_diagonal_system_with_restarts() {
        let g = make_grid(4, 4, 3, 1.0, None).unwrap();
        let b = SpectralField::random(&g, 3, 0.0);
        let diag: Vec<f64> = (0..b.as_slice().len()).map(|i| 1.0 + (i % 7) as f64).collect();
        let apply = |x: &SpectralField| -> Result<SpectralField> {
            let mut y = x.clone();
            for (a, d) in y.as_mut_slice().iter_mut().zip(&diag) {
                *a *= *d;
            }
            Ok(y)
        };
        let out = gmres(apply, |v| v.clone(), &b, 1e-12, 3, 200).unwrap();
        assert!(out.converged, "residual {}", out.residual);
        let mut check = out.x.clone();
        for (a, d) in check.as_mut_slice().iter_mut().zip(&diag) {
            *a *= *d;
        }
        assert!(check.sub(&b).norm() < 1e-10);
    }

    #[test]
    fn exact_preconditioner_converges_in_one_step() {
        let g = make_grid(4, 4, 2, 1.0, None).unwrap();
        let b = SpectralField::random(&g, 5, 0.0);
        let apply = |x: &SpectralField| -> Result<SpectralField> { Ok(x.scaled(4.0)) };
        let out = gmres(apply, |v| v.scaled(0.25), &b, 1e-13, 10, 10).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.x.sub(&b.scaled(0.25)).norm() < 1e-14);
    }
}
