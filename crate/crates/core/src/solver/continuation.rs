use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::spectral::{resample, Grid};

use super::{check_boundary, finalize, newton_polish, normalized_gradient_flow, ProblemSpec, SolveResult};

/// Solves on a chain of grids ending at the problem grid.
///
/// The first coarse grid is solved by [`normalized_gradient_flow`]. Each later
/// grid starts from the band-limited transfer of the previous solution and is
/// finished by [`newton_polish`], falling back to the flow when Newton does not
/// converge. Sharp 2-D profiles need fine grids where a flow from scratch is slow;
/// the coarse solve only has to land in the Newton basin.
pub fn solve_coarse_to_fine(spec: &ProblemSpec, coarse: &[Arc<Grid>]) -> Result<SolveResult> {
    let Some(first) = coarse.first() else {
        return normalized_gradient_flow(spec, None);
    };
    if coarse.iter().any(|g| g.dim() != spec.dim()) {
        return Err(invalid("coarse", "grid dimension differs from the problem"));
    }
    let start = normalized_gradient_flow(&spec.on_grid(first.clone())?, None)?;
    let mut iterations = start.iterations;
    let history = start.t_star_history;
    let monotone = start.energy_monotone;
    let mut u = start.u;
    let mut converged = start.converged;
    let levels = coarse[1..].iter().chain(std::iter::once(spec.grid()));
    for grid in levels {
        let level = spec.on_grid(grid.clone())?;
        let u0 = resample(&u, grid)?;
        check_boundary(&u0)?;
        let polished = newton_polish(&level, &u0, level.params.max_iter)?;
        iterations += polished.iterations;
        if polished.converged {
            u = polished.u;
            converged = true;
        } else {
            let r = normalized_gradient_flow(&level, Some(&u0))?;
            iterations += r.iterations;
            converged = r.converged;
            u = r.u;
        }
    }
    check_boundary(&u)?;
    finalize(u, spec, iterations, converged, true, monotone, history)
}
