//! Constrained solvers on the mass sphere `S_a = {|u|₂² = a}`.

mod continuation;
mod flow;
mod newton;
mod refine;
mod scan;
mod verify;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{dilate, FiberData};
use crate::functionals::{
    el_residual, energy, lagrange_lambda, pohozaev, seminorms, EnergyBreakdown, EnergyVariant,
    PohozaevVariant,
};
use crate::model::PotentialSpec;
use crate::spectral::{boundary_mass_fraction, mass, symmetrize, Field};

pub use crate::problem::{ProblemSpec, SolverParams};
pub use continuation::solve_coarse_to_fine;
pub use flow::normalized_gradient_flow;
pub use newton::newton_polish;
pub use refine::fiber_minimax_refine;
pub use scan::{mass_scan, mass_scan_rescaled, mass_scan_with, MassScan};
pub use verify::{verify_solution, Check, VerificationReport};

/// Largest boundary-shell mass fraction tolerated for an accepted iterate.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// A computed normalized solution and its diagnostics.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub lambda: f64,
    pub energies: EnergyBreakdown,
    /// `|P(u)|` (or `|P_∞(u)|`) over `|∇_{s₁}u|² + |∇_{s₂}u|²`.
    pub pohozaev_residual: f64,
    /// `‖J'(u) + λu‖₂ / ‖u‖₂`.
    pub el_residual: f64,
    pub mass_error: f64,
    pub boundary_mass_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False if an accepted flow step ever raised the energy.
    pub energy_monotone: bool,
    pub t_star_history: Vec<f64>,
    /// Largest normalized `|P|` over accepted manifold iterates, when tracked.
    pub max_iterate_pohozaev: Option<f64>,
}

/// Serializable summary of a [`SolveResult`] without the field samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRecord {
    pub lambda: f64,
    pub energies: EnergyBreakdown,
    pub pohozaev_residual: f64,
    pub el_residual: f64,
    pub mass_error: f64,
    pub boundary_mass_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    pub energy_monotone: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_star_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterate_pohozaev: Option<f64>,
}

impl SolveResult {
    pub fn record(&self) -> SolveRecord {
        SolveRecord {
            lambda: self.lambda,
            energies: self.energies,
            pohozaev_residual: self.pohozaev_residual,
            el_residual: self.el_residual,
            mass_error: self.mass_error,
            boundary_mass_fraction: self.boundary_mass_fraction,
            iterations: self.iterations,
            converged: self.converged,
            energy_monotone: self.energy_monotone,
            t_star_history: self.t_star_history.clone(),
            max_iterate_pohozaev: self.max_iterate_pohozaev,
        }
    }

    /// Rebuilds a result from a stored record and field.
    pub fn from_record(record: SolveRecord, u: Field) -> Self {
        SolveResult {
            u,
            lambda: record.lambda,
            energies: record.energies,
            pohozaev_residual: record.pohozaev_residual,
            el_residual: record.el_residual,
            mass_error: record.mass_error,
            boundary_mass_fraction: record.boundary_mass_fraction,
            iterations: record.iterations,
            converged: record.converged,
            energy_monotone: record.energy_monotone,
            t_star_history: record.t_star_history,
            max_iterate_pohozaev: record.max_iterate_pohozaev,
        }
    }

    /// The variational level: `J` with a potential, `I` without.
    pub fn level(&self) -> f64 {
        self.energies.j
    }
}

/// Whether the solver works on the Pohozaev manifold (saddle geometry) rather
/// than minimizing directly on the sphere.
pub(crate) fn uses_projection(spec: &ProblemSpec) -> bool {
    matches!(
        spec.potential(),
        PotentialSpec::None | PotentialSpec::NegativeWell { .. }
    )
}

pub(crate) fn normalize(u: &Field, a: f64) -> Result<Field> {
    let m = mass(u);
    if !(m.sqrt() > 1e-14) {
        return Err(Error::Collapse(m.sqrt()));
    }
    Ok(u.scaled((a / m).sqrt()))
}

pub(crate) fn constrain(u: Field, spec: &ProblemSpec) -> Result<Field> {
    let u = if spec.radial { symmetrize(&u) } else { u };
    normalize(&u, spec.mass)
}

/// Normalized Pohozaev value `P/(|∇_{s₁}u|² + |∇_{s₂}u|²)`.
pub(crate) fn pohozaev_ratio(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
    Ok(pohozaev(u, spec, PohozaevVariant::P)? / (a1 + a2))
}

/// Dilates onto `P = 0` and renormalizes, repeating until `|P|/(A₁+A₂) < 1e-10`.
/// Returns the projected field and the first critical dilation.
pub(crate) fn project_to_manifold(u: &Field, spec: &ProblemSpec) -> Result<(Field, f64)> {
    let mut v = u.clone();
    let mut first = None;
    for _ in 0..6 {
        let t = FiberData::new(&v, spec, true)?.t_star()?;
        first.get_or_insert(t);
        // dilation round-off is amplified by the high symbol, so skip it when already on P = 0
        if (t - 1.0).abs() < 1e-15 || pohozaev_ratio(&v, spec)?.abs() < 1e-10 {
            break;
        }
        v = constrain(dilate(&v, t)?, spec)?;
    }
    Ok((v, first.unwrap_or(1.0)))
}

/// Centered Gaussian on `S_a`, seeded perturbation, dilated near the manifold when projecting.
pub fn initial_guess(spec: &ProblemSpec) -> Result<Field> {
    let g = spec.grid();
    let l = g.box_length();
    let h = g.spacing();
    let mut width = match spec.potential() {
        PotentialSpec::Coercive { omega, .. } => (l / 16.0).min(1.0 / omega.sqrt()),
        _ => l / 16.0,
    };
    let gaussian = |w: f64| {
        Field::from_fn(g.clone(), |[x, y]| (-(x * x + y * y) / (2.0 * w * w)).exp())
            .and_then(|f| normalize(&f, spec.mass))
    };
    let mut u = gaussian(width)?;
    if uses_projection(spec) {
        for _ in 0..4 {
            let t = FiberData::new(&u, spec, true)?.t_star()?;
            width = (width / t).max(2.0 * h);
            u = gaussian(width)?;
            if (t - 1.0).abs() < 1e-6 {
                break;
            }
        }
    }
    let eps = spec.params.perturbation;
    if eps > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.params.seed);
        let bumps: Vec<([f64; 2], f64, f64)> = (0..3)
            .map(|_| {
                let mut c = [0.0; 2];
                for ci in c.iter_mut().take(g.dim()) {
                    *ci = rng.gen_range(-0.5..=0.5) * width;
                }
                let w = rng.gen_range(0.5..=1.5) * width;
                (c, w, rng.gen_range(-1.0..=1.0))
            })
            .collect();
        let peak = u.max_abs();
        let noise = g.sample(|[x, y]| {
            bumps
                .iter()
                .map(|&([cx, cy], w, amp)| {
                    amp * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp()
                })
                .sum::<f64>()
        });
        let values = u
            .values()
            .iter()
            .zip(&noise)
            .map(|(v, n)| v + eps * peak * n)
            .collect();
        u = Field::new(g.clone(), values)?;
    }
    constrain(u, spec)
}

/// Evaluates every diagnostic of `u` as a solution of `spec`.
pub(crate) fn finalize(
    u: Field,
    spec: &ProblemSpec,
    iterations: usize,
    method_converged: bool,
    require_el: bool,
    energy_monotone: bool,
    t_star_history: Vec<f64>,
) -> Result<SolveResult> {
    let lambda = lagrange_lambda(&u, spec)?;
    let el = el_residual(&u, spec, lambda)?;
    let energies = energy(&u, spec, EnergyVariant::J)?;
    // NaN when a sampled potential carries no W samples
    let pohozaev_residual = pohozaev_ratio(&u, spec).map(f64::abs).unwrap_or(f64::NAN);
    let mass_error = (mass(&u) - spec.mass).abs();
    let converged = method_converged
        && (!require_el || el < spec.params.tol_residual)
        && mass_error < 1e-10 * spec.mass;
    Ok(SolveResult {
        boundary_mass_fraction: boundary_mass_fraction(&u),
        u,
        lambda,
        energies,
        pohozaev_residual,
        el_residual: el,
        mass_error,
        iterations,
        converged,
        energy_monotone,
        t_star_history,
        max_iterate_pohozaev: None,
    })
}

pub(crate) fn check_boundary(u: &Field) -> Result<()> {
    let fraction = boundary_mass_fraction(u);
    if fraction > BOUNDARY_TOL {
        Err(Error::BoundaryMass {
            fraction,
            threshold: BOUNDARY_TOL,
        })
    } else {
        Ok(())
    }
}
