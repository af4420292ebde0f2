use crate::error::{Error, Result};
use crate::functionals::{
    el_gradient_with, energy, mixed_symbol, pohozaev, EnergyVariant, PohozaevVariant,
};
use crate::spectral::{apply_symbol, frac_symbol, inner, mass, symmetrize, Field};

use super::newton::{gmres, restart_for};
use super::{
    constrain, finalize, pohozaev_ratio, project_to_manifold, uses_projection, ProblemSpec,
    SolveResult,
};

const MAX_HALVINGS: usize = 40;
const MAX_NEWTON: usize = 30;

/// `∇P(u) = 2s₁(-Δ)^{s₁}u + 2s₂(-Δ)^{s₂}u - d·G̃'(u) - 2Wu`.
fn pohozaev_gradient(u: &Field, spec: &ProblemSpec) -> Result<Field> {
    let (s1, s2) = (spec.s1(), spec.s2());
    let sym: Vec<f64> = u
        .grid()
        .xi_sq()
        .iter()
        .map(|&k2| 2.0 * s1 * frac_symbol(k2, s1) + 2.0 * s2 * frac_symbol(k2, s2))
        .collect();
    let lin = apply_symbol(u, &sym)?;
    let d = spec.dim() as f64;
    let n = spec.nonlinearity();
    let w = if spec.potential().is_none() {
        None
    } else {
        Some(spec.w_samples()?)
    };
    let values = lin
        .values()
        .iter()
        .zip(u.values())
        .enumerate()
        .map(|(i, (l, &x))| {
            let gt_prime = 0.5 * (n.g_prime(x) * x - n.g(x));
            l - d * gt_prime - w.map_or(0.0, |w| 2.0 * w[i] * x)
        })
        .collect();
    Field::new(u.grid().clone(), values)
}

/// Preconditioned descent on `u ↦ J(t_u * u)` over `S_a`.
///
/// Iterates stay on the Pohozaev manifold: every trial point is renormalized and
/// dilated to its critical dilation. Directions are `-(K + c)^{-1}` applied to the
/// sphere gradient, projected on the tangent space `{h : ⟨h, u⟩ = 0}`. Without
/// the saddle geometry (coercive or sampled potentials) the same descent runs on
/// `S_a` directly.
///
/// Convergence is declared when the energy stalls and the gradient has no
/// component along the manifold, i.e. `J'(u) + λu` is parallel to `∇P(u)`.
/// Energy descent alone stalls near `kkt ~ sqrt(ε·|J|·λ)`, so a stalled descent
/// is finished by Newton–GMRES on the multiplier system in `(u, λ, ν)`. On a
/// periodic box this is generally not an exact Euler–Lagrange point, so
/// `el_residual` is reported but not required.
pub fn fiber_minimax_refine(spec: &ProblemSpec, u: &Field) -> Result<SolveResult> {
    spec.params.validate()?;
    spec.check_grid(u)?;
    let p = &spec.params;
    let project = uses_projection(spec);
    let mut v = constrain(u.clone(), spec)?;
    let mut history = Vec::new();
    if project {
        let (w, t) = project_to_manifold(&v, spec)?;
        v = w;
        history.push(t);
    }
    let mut max_p = if project { pohozaev_ratio(&v, spec)?.abs() } else { 0.0 };
    let sym = mixed_symbol(spec);
    let mut e = energy(&v, spec, EnergyVariant::J)?.j;
    let mut alpha: f64 = 1.0;
    let mut last_change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = false;

    while iterations < p.max_iter {
        iterations += 1;
        let Kkt { kkt, lambda, r, .. } = kkt_state(&v, spec, &sym, project)?;
        if kkt < p.tol_residual && last_change < p.tol_energy * e.abs().max(1.0) {
            converged = true;
            break;
        }
        if last_change < p.tol_energy * e.abs().max(1.0) {
            stalled = true;
            break;
        }

        let c = lambda.abs().max(1.0);
        let prec: Vec<f64> = sym.iter().map(|s| -1.0 / (s + c)).collect();
        let dir = apply_symbol(&r, &prec)?;
        let dir = dir.axpy(-inner(&dir, &v)? / mass(&v), &v)?;

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = constrain(v.axpy(alpha, &dir)?, spec)?;
            let (trial, t) = if project {
                let (w, t) = project_to_manifold(&trial, spec)?;
                (w, Some(t))
            } else {
                (trial, None)
            };
            let et = energy(&trial, spec, EnergyVariant::J)?.j;
            if et < e {
                accepted = Some((trial, et, t));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((w, et, t)) => {
                last_change = e - et;
                e = et;
                v = w;
                if let Some(t) = t {
                    history.push(t);
                    max_p = max_p.max(pohozaev_ratio(&v, spec)?.abs());
                }
                alpha = (2.0 * alpha).min(1.0);
            }
            None => {
                // no decrease even for tiny steps: round-off floor or a genuine failure
                if kkt < 1e-4 {
                    stalled = true;
                    break;
                }
                return Err(Error::LineSearch(MAX_HALVINGS));
            }
        }
    }
    if stalled {
        // energy descent cannot resolve the last digits; finish on the KKT system
        let (w, steps) = kkt_newton(spec, &v, &sym, project)?;
        iterations += steps;
        if project {
            max_p = max_p.max(pohozaev_ratio(&w, spec)?.abs());
        }
        converged = kkt_state(&w, spec, &sym, project)?.kkt < p.tol_residual;
        v = w;
    }
    let mut out = finalize(v, spec, iterations, converged, false, true, history)?;
    if project {
        out.max_iterate_pohozaev = Some(max_p);
    }
    Ok(out)
}

struct Kkt {
    kkt: f64,
    lambda: f64,
    r: Field,
    /// Multiplier of `∇P` (zero without projection).
    nu: f64,
}

/// Sphere gradient `r = J'(u) + λu` and its part orthogonal to the tangential `∇P`.
fn kkt_state(v: &Field, spec: &ProblemSpec, sym: &[f64], project: bool) -> Result<Kkt> {
    let grad = el_gradient_with(v, spec, sym)?;
    let m = mass(v);
    let lambda = -inner(&grad, v)? / m;
    let r = grad.axpy(lambda, v)?;
    let (kkt_vec, nu) = if project {
        let np = pohozaev_gradient(v, spec)?;
        let nt = np.axpy(-inner(&np, v)? / m, v)?;
        let nn = inner(&nt, &nt)?;
        if nn > 0.0 {
            let nu = inner(&r, &nt)? / nn;
            (r.axpy(-nu, &nt)?, nu)
        } else {
            (r.clone(), 0.0)
        }
    } else {
        (r.clone(), 0.0)
    };
    Ok(Kkt {
        kkt: (mass(&kkt_vec) / m).sqrt(),
        lambda,
        r,
        nu,
    })
}

/// Newton–GMRES on
///
/// ```text
/// F(u, λ, ν) = ( J'(u) + λu - ν∇P(u),  (|u|₂² - a)/2,  P(u) )
/// ```
///
/// (the last block and `ν` are dropped without projection), right-preconditioned
/// by `((-Δ)^{s₁} + (-Δ)^{s₂} + c)^{-1}`. Returns the best iterate, renormalized and
/// back on the manifold, and the number of Newton steps.
fn kkt_newton(spec: &ProblemSpec, u0: &Field, sym: &[f64], project: bool) -> Result<(Field, usize)> {
    let grid = u0.grid().clone();
    let n = grid.len();
    let h = grid.cell_volume();
    let a = spec.mass;
    let (s1, s2) = (spec.s1(), spec.s2());
    let d = spec.dim() as f64;
    let nl = spec.nonlinearity();
    let v_pot = spec.v_samples();
    let w_pot = if project && !spec.potential().is_none() {
        Some(spec.w_samples()?)
    } else {
        None
    };
    let p_sym: Vec<f64> = grid
        .xi_sq()
        .iter()
        .map(|&k2| 2.0 * s1 * frac_symbol(k2, s1) + 2.0 * s2 * frac_symbol(k2, s2))
        .collect();
    let wdot = |x: &[f64], y: &[f64]| -> f64 {
        h * x[..n].iter().zip(&y[..n]).map(|(p, q)| p * q).sum::<f64>()
            + x[n..].iter().zip(&y[n..]).map(|(p, q)| p * q).sum::<f64>()
    };
    let wnorm = |x: &[f64]| wdot(x, x).sqrt();
    let residual = |u: &Field, lambda: f64, nu: f64| -> Result<Vec<f64>> {
        let grad = el_gradient_with(u, spec, sym)?;
        let mut f: Vec<f64> = grad.values().iter().zip(u.values()).map(|(g, x)| g + lambda * x).collect();
        if project {
            let np = pohozaev_gradient(u, spec)?;
            for (fi, pi) in f.iter_mut().zip(np.values()) {
                *fi -= nu * pi;
            }
        }
        f.push(0.5 * (mass(u) - a));
        if project {
            f.push(pohozaev(u, spec, PohozaevVariant::P)?);
        }
        Ok(f)
    };

    let start = kkt_state(u0, spec, sym, project)?;
    let mut u = u0.clone();
    let (mut lambda, mut nu) = (start.lambda, start.nu);
    let mut best = (start.kkt, u0.clone());
    let mut steps = 0;
    while steps < MAX_NEWTON && best.0 >= spec.params.tol_residual {
        steps += 1;
        let f = residual(&u, lambda, nu)?;
        let fnorm = wnorm(&f);
        let c = lambda.abs().max(1.0);
        let prec_sym: Vec<f64> = sym.iter().map(|s| 1.0 / (s + c)).collect();
        let uvals = u.values().to_vec();
        let np = if project { pohozaev_gradient(&u, spec)?.into_values() } else { vec![0.0; n] };
        // diagonal of J''(u) - ν∇P'(u) beyond the Fourier multipliers
        let diag: Vec<f64> = uvals
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let gtpp: f64 = nl
                    .terms
                    .iter()
                    .map(|t| 0.5 * t.mu * (t.p - 1.0) * (t.p - 2.0) * x.abs().powf(t.p - 2.0))
                    .sum();
                let w = w_pot.map_or(0.0, |w| w[i]);
                v_pot[i] + lambda - nl.g_prime(x) + nu * (d * gtpp + 2.0 * w)
            })
            .collect();
        let lin_sym: Vec<f64> = sym.iter().zip(&p_sym).map(|(k, q)| k - nu * q).collect();

        let precondition = |x: &[f64]| -> Result<Vec<f64>> {
            let field = Field::new(grid.clone(), x[..n].to_vec())?;
            let mut out = apply_symbol(&field, &prec_sym)?.into_values();
            out.extend_from_slice(&x[n..]);
            Ok(out)
        };
        let jacobian = |x: &[f64]| -> Result<Vec<f64>> {
            let du = Field::new(grid.clone(), x[..n].to_vec())?;
            let k = apply_symbol(&du, &lin_sym)?;
            let dnu = if project { x[n + 1] } else { 0.0 };
            let mut out: Vec<f64> = k
                .values()
                .iter()
                .enumerate()
                .map(|(i, kx)| kx + diag[i] * x[i] + x[n] * uvals[i] - dnu * np[i])
                .collect();
            out.push(h * uvals.iter().zip(&x[..n]).map(|(p, q)| p * q).sum::<f64>());
            if project {
                out.push(h * np.iter().zip(&x[..n]).map(|(p, q)| p * q).sum::<f64>());
            }
            Ok(out)
        };
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let y = gmres(&|x| jacobian(&precondition(x)?), &rhs, &wdot, 1e-6, restart_for(n), 8)?;
        let delta = precondition(&y)?;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = uvals.iter().zip(&delta[..n]).map(|(x, dx)| x + alpha * dx).collect();
            let mut cand = Field::new(grid.clone(), cand)?;
            if spec.radial {
                cand = symmetrize(&cand);
            }
            let cl = lambda + alpha * delta[n];
            let cn = if project { nu + alpha * delta[n + 1] } else { nu };
            if wnorm(&residual(&cand, cl, cn)?) < (1.0 - 1e-4 * alpha) * fnorm {
                u = cand;
                lambda = cl;
                nu = cn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        let mut w = constrain(u.clone(), spec)?;
        if project {
            w = project_to_manifold(&w, spec)?.0;
        }
        let k = kkt_state(&w, spec, sym, project)?.kkt;
        if k < best.0 {
            best = (k, w);
        }
    }
    Ok((best.1, steps))
}
