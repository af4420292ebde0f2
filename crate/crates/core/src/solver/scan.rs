use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fiber::find_t_star;
use crate::spectral::{make_grid, Field, Grid};

use super::{normalized_gradient_flow, ProblemSpec};

/// Levels and multipliers along a list of masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassScan {
    pub a_values: Vec<f64>,
    pub level_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub converged: Vec<bool>,
    /// Error message per failed point.
    pub errors: Vec<Option<String>>,
}

impl MassScan {
    /// True when every converged level is strictly below its predecessor.
    pub fn strictly_decreasing(&self) -> bool {
        self.level_values.windows(2).all(|w| w[1] < w[0])
    }
}

/// Solves at every mass on the problem grid.
pub fn mass_scan(spec: &ProblemSpec, a_values: &[f64]) -> Result<MassScan> {
    let grid = spec.grid().clone();
    mass_scan_with(spec, a_values, &|_| Ok(grid.clone()), 1)
}

/// Solves at every mass on a box rescaled to the expected solution width.
///
/// Without a trap the profile concentrates as the mass shrinks. The box for mass
/// `a` is `L·t(a₀)/t(a)`, where `t(a)` is the critical dilation of a fixed
/// Gaussian of mass `a` and `a₀` is the problem mass, so every point of the scan
/// sees the same resolution relative to its profile. Trapping and sampled
/// potentials fix the length scale and keep the problem grid.
pub fn mass_scan_rescaled(spec: &ProblemSpec, a_values: &[f64], jobs: usize) -> Result<MassScan> {
    let grid = spec.grid().clone();
    if !super::uses_projection(spec) {
        return mass_scan_with(spec, a_values, &|_| Ok(grid.clone()), jobs);
    }
    let width = grid.box_length() / 16.0;
    let probe = Field::from_fn(grid.clone(), |[x, y]| (-(x * x + y * y) / (2.0 * width * width)).exp())?;
    let t_of = |a: f64| find_t_star(&probe.normalized_to(a)?, &spec.clone().with_mass(a), true);
    let t_ref = t_of(spec.mass)?;
    let grid_for = |a: f64| -> Result<Arc<Grid>> {
        let l = grid.box_length() * t_ref / t_of(a)?;
        make_grid(grid.dim(), grid.n_per_dim(), l)
    };
    mass_scan_with(spec, a_values, &grid_for, jobs)
}

/// Level, multiplier, convergence flag and error message of one scan point.
type Point = (f64, f64, bool, Option<String>);

/// Solves at every mass, on the grid chosen by `grid_for(a)`, with up to `jobs`
/// concurrent solves. Failed points are flagged, never fatal.
pub fn mass_scan_with(
    spec: &ProblemSpec,
    a_values: &[f64],
    grid_for: &(dyn Fn(f64) -> Result<Arc<Grid>> + Sync),
    jobs: usize,
) -> Result<MassScan> {
    if a_values.is_empty() {
        return Err(invalid("a_values", "empty"));
    }
    if a_values.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(invalid("a_values", "masses must be positive"));
    }
    if a_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("a_values", "masses must be strictly increasing"));
    }
    let n = a_values.len();
    let slots: Mutex<Vec<Option<Point>>> = Mutex::new(vec![None; n]);
    let next = AtomicUsize::new(0);
    let solve_one = |a: f64| -> Point {
        let run = || -> Result<(f64, f64, bool)> {
            let sp = spec.on_grid(grid_for(a)?)?.with_mass(a);
            let r = normalized_gradient_flow(&sp, None)?;
            Ok((r.level(), r.lambda, r.converged))
        };
        match run() {
            Ok((l, lam, c)) => (l, lam, c, None),
            Err(e) => (f64::NAN, f64::NAN, false, Some(e.to_string())),
        }
    };
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = solve_one(a_values[i]);
                slots.lock().expect("scan slots")[i] = Some(out);
            });
        }
    });
    let slots = slots.into_inner().expect("scan slots");
    let mut scan = MassScan {
        a_values: a_values.to_vec(),
        level_values: Vec::with_capacity(n),
        lambda_values: Vec::with_capacity(n),
        converged: Vec::with_capacity(n),
        errors: Vec::with_capacity(n),
    };
    for (level, lambda, conv, err) in slots.into_iter().flatten() {
        scan.level_values.push(level);
        scan.lambda_values.push(lambda);
        scan.converged.push(conv);
        scan.errors.push(err);
    }
    Ok(scan)
}
