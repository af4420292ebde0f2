use crate::error::{Error, Result};
use crate::functionals::{el_gradient_with, energy, mixed_symbol, EnergyVariant};
use crate::spectral::{apply_symbol, inner, mass, Field, MultiplierSpec};

use super::{
    check_boundary, constrain, finalize, initial_guess, newton_polish, project_to_manifold,
    uses_projection, ProblemSpec, SolveResult,
};

/// Semi-implicit normalized gradient flow.
///
/// Each step solves `(1 + τ((-Δ)^{s₁} + (-Δ)^{s₂} + μ)) u⁺ = u + τ(g(u) - Vu - (λ-μ)u)`
/// with `λ` the current multiplier and `μ = max(λ, 0)`, then renormalizes onto
/// `S_a`. Without a potential or with a negative well, every iterate is also
/// dilated back onto the Pohozaev manifold. Once the energy stalls the iterate
/// is handed to [`newton_polish`].
pub fn normalized_gradient_flow(spec: &ProblemSpec, u0: Option<&Field>) -> Result<SolveResult> {
    spec.params.validate()?;
    let project = uses_projection(spec);
    let mut u = match u0 {
        Some(u0) => {
            spec.check_grid(u0)?;
            constrain(u0.clone(), spec)?
        }
        None => initial_guess(spec)?,
    };
    let mut history = Vec::new();
    if project {
        let (v, t) = project_to_manifold(&u, spec)?;
        history.push(t);
        u = v;
    }
    check_boundary(&u)?;

    let p = &spec.params;
    let sym = mixed_symbol(spec);
    let n = spec.nonlinearity();
    let v = spec.v_samples();
    let vmax = spec.max_abs_v();
    let mut e = energy(&u, spec, EnergyVariant::J)?.j;
    let mut tau = p.tau;
    // only energy-nonincreasing steps are accepted
    let monotone = true;
    let mut iterations = 0;
    let mut plateau = false;

    while iterations < p.max_iter {
        iterations += 1;
        let grad = el_gradient_with(&u, spec, &sym)?;
        let m = mass(&u);
        let lambda = -inner(&grad, &u)? / m;
        let res = (mass(&grad.axpy(lambda, &u)?) / m).sqrt();
        if !res.is_finite() {
            return Err(Error::Divergence("non-finite residual".into()));
        }
        if res < p.tol_residual && plateau {
            return finalize(u, spec, iterations, true, true, monotone, history);
        }

        let gmax = u.values().iter().fold(0.0_f64, |acc, &x| acc.max(n.g_over_t(x)));
        let tau_e = tau.min(0.5 / (gmax + vmax));
        let mu = lambda.max(0.0);
        let rest = lambda - mu;
        let rhs: Vec<f64> = u
            .values()
            .iter()
            .zip(v)
            .map(|(&x, vx)| x + tau_e * (n.g(x) - vx * x - rest * x))
            .collect();
        let rhs = Field::new(u.grid().clone(), rhs)?;
        let flow = MultiplierSpec::FlowInverse {
            s1: spec.s1(),
            s2: spec.s2(),
            tau: tau_e / (1.0 + tau_e * mu),
        };
        let mut next = constrain(apply_symbol(&rhs, &u.grid().symbol(&flow))?, spec)?;
        let mut t_first = None;
        if project {
            let (w, t) = project_to_manifold(&next, spec)?;
            next = w;
            t_first = Some(t);
        }
        let e_next = energy(&next, spec, EnergyVariant::J)?.j;
        if !e_next.is_finite() {
            return Err(Error::Divergence("non-finite energy".into()));
        }
        if e_next > e + 1e-12 * e.abs().max(1.0) {
            tau *= 0.5;
            if tau < 1e-14 {
                plateau = true;
                break;
            }
            continue;
        }
        check_boundary(&next)?;
        if let Some(t) = t_first {
            history.push(t);
        }
        let change = (e - e_next).abs();
        u = next;
        e = e_next;
        tau = (tau * 1.25).min(p.tau);
        if change < p.tol_energy * e.abs().max(1.0) {
            plateau = true;
            if res >= p.tol_residual {
                break;
            }
        }
    }

    if iterations >= p.max_iter && !plateau {
        return Err(Error::MaxIterations(p.max_iter));
    }
    let polished = newton_polish(spec, &u, p.max_iter.saturating_sub(iterations).max(1))?;
    let total = iterations + polished.iterations;
    finalize(polished.u, spec, total, polished.converged, true, monotone, history)
}
