use crate::error::{Error, Result};
use crate::functionals::{el_gradient_with, lagrange_lambda, mixed_symbol};
use crate::spectral::{apply_symbol, mass, symmetrize, Field};

use super::{normalize, ProblemSpec};

/// Outcome of [`newton_polish`].
#[derive(Debug, Clone)]
pub struct Polished {
    pub u: Field,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

const RESTART: usize = 60;
/// Krylov basis budget in bytes; large grids get a shorter restart.
const BASIS_BYTES: usize = 1 << 30;

pub(super) fn restart_for(len: usize) -> usize {
    (BASIS_BYTES / (8 * (len + 2))).clamp(20, RESTART)
}
const MAX_NEWTON: usize = 40;

/// Newton–GMRES on the bordered system
///
/// ```text
/// F(u, λ) = ( (-Δ)^{s₁}u + (-Δ)^{s₂}u + Vu + λu - g(u),  (|u|₂² - a)/2 )
/// ```
///
/// right-preconditioned by `((-Δ)^{s₁} + (-Δ)^{s₂} + c)^{-1}` on the field block,
/// with backtracking on `‖F‖`. Used to finish a solve once first-order methods stall.
pub fn newton_polish(spec: &ProblemSpec, u0: &Field, max_steps: usize) -> Result<Polished> {
    spec.check_grid(u0)?;
    let grid = u0.grid().clone();
    let n = grid.len();
    let h = grid.cell_volume();
    let a = spec.mass;
    let tol = spec.params.tol_residual;
    let sym = mixed_symbol(spec);
    let nl = spec.nonlinearity();
    let v = spec.v_samples();

    let wdot = |x: &[f64], y: &[f64]| -> f64 {
        h * x[..n].iter().zip(&y[..n]).map(|(p, q)| p * q).sum::<f64>() + x[n] * y[n]
    };

    let residual = |u: &Field, lambda: f64| -> Result<Vec<f64>> {
        let grad = el_gradient_with(u, spec, &sym)?;
        let mut r: Vec<f64> = grad
            .values()
            .iter()
            .zip(u.values())
            .map(|(g, x)| g + lambda * x)
            .collect();
        r.push(0.5 * (mass(u) - a));
        Ok(r)
    };
    // iterates stay on the sphere with their own multiplier, so the mass block of F vanishes
    let project = |u: Field| -> Result<(Field, f64, Vec<f64>, f64)> {
        let u = normalize(&u, a)?;
        let lambda = lagrange_lambda(&u, spec)?;
        let f = residual(&u, lambda)?;
        let res = (h * f[..n].iter().map(|x| x * x).sum::<f64>() / a).sqrt();
        Ok((u, lambda, f, res))
    };

    let (mut u, mut lambda, mut f, mut res) = project(u0.clone())?;
    let mut steps = 0;
    while res >= tol && steps < max_steps.min(MAX_NEWTON) {
        steps += 1;
        let c = lambda.abs().max(1.0);
        let prec_sym: Vec<f64> = sym.iter().map(|s| 1.0 / (s + c)).collect();
        let gp: Vec<f64> = u.values().iter().map(|&x| nl.g_prime(x)).collect();
        let uvals = u.values().to_vec();

        let precondition = |x: &[f64]| -> Result<Vec<f64>> {
            let field = Field::new(grid.clone(), x[..n].to_vec())?;
            let mut out = apply_symbol(&field, &prec_sym)?.into_values();
            out.push(x[n]);
            Ok(out)
        };
        let jacobian = |x: &[f64]| -> Result<Vec<f64>> {
            let du = Field::new(grid.clone(), x[..n].to_vec())?;
            let k = apply_symbol(&du, &sym)?;
            let mut out: Vec<f64> = k
                .values()
                .iter()
                .enumerate()
                .map(|(i, kx)| kx + (v[i] + lambda - gp[i]) * x[i] + x[n] * uvals[i])
                .collect();
            // scaled like the field rows so GMRES resolves the constraint as well
            out.push(c * h * uvals.iter().zip(&x[..n]).map(|(p, q)| p * q).sum::<f64>());
            Ok(out)
        };
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let y = gmres(&|x| jacobian(&precondition(x)?), &rhs, &wdot, 1e-4, restart_for(n), 6)?;
        let mut delta = precondition(&y)?;
        // an inexact solve leaves a normal component, which renormalization would amplify by λ
        let along = uvals.iter().zip(&delta[..n]).map(|(p, q)| p * q).sum::<f64>()
            / uvals.iter().map(|p| p * p).sum::<f64>();
        for (d, x) in delta[..n].iter_mut().zip(&uvals) {
            *d -= along * x;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = uvals.iter().zip(&delta[..n]).map(|(x, d)| x + alpha * d).collect();
            let mut cand = Field::new(grid.clone(), cand)?;
            if spec.radial {
                cand = symmetrize(&cand);
            }
            let next = project(cand)?;
            if next.3 < (1.0 - 1e-4 * alpha) * res {
                (u, lambda, f, res) = next;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(Polished {
        u,
        lambda,
        iterations: steps,
        converged: res < tol,
    })
}

/// Restarted GMRES in the inner product `dot`; returns `x` with `‖A x - b‖ ≤ rtol ‖b‖` if reached.
pub(super) fn gmres(
    op: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    dot: &dyn Fn(&[f64], &[f64]) -> f64,
    rtol: f64,
    restart: usize,
    cycles: usize,
) -> Result<Vec<f64>> {
    let len = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; len];
    if bnorm == 0.0 {
        return Ok(x);
    }
    for _ in 0..cycles {
        let ax = op(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = dot(&r, &r).sqrt();
        if beta <= rtol * bnorm {
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut gvec = vec![beta];
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = op(&basis[k])?;
            let mut col = vec![0.0; k + 2];
            for (j, q) in basis.iter().enumerate() {
                let hj = dot(&w, q);
                col[j] = hj;
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= hj * qi;
                }
            }
            let wn = dot(&w, &w).sqrt();
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let rho = (col[k] * col[k] + col[k + 1] * col[k + 1]).sqrt();
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[k] / rho, col[k + 1] / rho) };
            cs.push(c);
            sn.push(s);
            col[k] = rho;
            col[k + 1] = 0.0;
            gvec.push(-s * gvec[k]);
            gvec[k] *= c;
            hess.push(col);
            k_used = k + 1;
            if gvec[k + 1].abs() <= rtol * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = gvec[i];
            for j in i + 1..k_used {
                acc -= hess[j][i] * yk[j];
            }
            if hess[i][i] == 0.0 {
                return Err(Error::Divergence("singular Krylov system".into()));
            }
            yk[i] = acc / hess[i][i];
        }
        for (j, yj) in yk.iter().enumerate() {
            for (xi, qi) in x.iter_mut().zip(&basis[j]) {
                *xi += yj * qi;
            }
        }
        if gvec[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    Ok(x)
}
