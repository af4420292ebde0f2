//! Problem description shared by functionals, fiber maps and solvers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{check_admissibility, AssumptionReport, NonlinearitySpec, PotentialSpec};
use crate::spectral::{Field, Grid};

/// Iteration controls for the constrained solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Flow step size; capped per step for explicit stability.
    pub tau: f64,
    pub tol_residual: f64,
    pub tol_energy: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative amplitude of the seeded perturbation of the initial guess.
    pub perturbation: f64,
    /// Lower floor for `|∇_{s₁}u|² + |∇_{s₂}u|²` checked by verification.
    pub delta_sq_floor: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tau: 0.1,
            tol_residual: 1e-8,
            tol_energy: 1e-10,
            max_iter: 200_000,
            seed: 0,
            perturbation: 0.05,
            delta_sq_floor: 1e-8,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tau", self.tau),
            ("tol_residual", self.tol_residual),
            ("tol_energy", self.tol_energy),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be positive"));
        }
        if !(self.perturbation >= 0.0 && self.perturbation < 1.0) {
            return Err(invalid("perturbation", format!("{} not in [0, 1)", self.perturbation)));
        }
        Ok(())
    }
}

/// Samples of the potential terms on the problem grid.
#[derive(Debug)]
pub(crate) struct SampledPotential {
    pub v: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub max_abs_v: f64,
}

/// Mass-constrained problem: orders, mass, nonlinearity, potential and grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    s1: f64,
    s2: f64,
    pub mass: f64,
    nonlinearity: NonlinearitySpec,
    potential: PotentialSpec,
    grid: Arc<Grid>,
    pub radial: bool,
    pub params: SolverParams,
    report: AssumptionReport,
    sampled: Arc<SampledPotential>,
}

impl ProblemSpec {
    pub fn new(
        grid: Arc<Grid>,
        s1: f64,
        s2: f64,
        mass: f64,
        nonlinearity: NonlinearitySpec,
        potential: PotentialSpec,
    ) -> Result<Self> {
        if !(s1 > 0.0 && s1 < 1.0) {
            return Err(invalid("s1", format!("{s1} not in (0, 1)")));
        }
        if !(s2 >= s1 && s2 < 1.0) {
            return Err(invalid("s2", format!("{s2} not in [s1, 1)")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("a", format!("{mass} must be positive")));
        }
        nonlinearity.validate()?;
        potential.validate()?;
        let sampled = sample_potential(&potential, &grid, nonlinearity.alpha())?;
        let report = check_admissibility(grid.dim(), s1, s2, &nonlinearity);
        Ok(ProblemSpec {
            s1,
            s2,
            mass,
            nonlinearity,
            potential,
            grid,
            radial: false,
            params: SolverParams::default(),
            report,
            sampled: Arc::new(sampled),
        })
    }

    pub fn with_params(mut self, params: SolverParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_radial(mut self, radial: bool) -> Self {
        self.radial = radial;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    /// Same problem on another grid (same dimension).
    pub fn on_grid(&self, grid: Arc<Grid>) -> Result<Self> {
        if grid.dim() != self.grid.dim() {
            return Err(Error::GridMismatch);
        }
        let mut out = ProblemSpec::new(
            grid,
            self.s1,
            self.s2,
            self.mass,
            self.nonlinearity.clone(),
            self.potential.clone(),
        )?;
        out.radial = self.radial;
        out.params = self.params;
        out.report = self.report.clone();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> f64 {
        self.s2
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn assumptions(&self) -> &AssumptionReport {
        &self.report
    }

    pub fn assumptions_mut(&mut self) -> &mut AssumptionReport {
        &mut self.report
    }

    pub(crate) fn v_samples(&self) -> &[f64] {
        &self.sampled.v
    }

    pub(crate) fn w_samples(&self) -> Result<&[f64]> {
        self.sampled
            .w
            .as_deref()
            .ok_or(Error::NoAnalyticPotential("custom_sampled"))
    }

    pub(crate) fn max_abs_v(&self) -> f64 {
        self.sampled.max_abs_v
    }

    pub(crate) fn check_grid(&self, u: &Field) -> Result<()> {
        if u.grid().same_as(&self.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn sample_potential(p: &PotentialSpec, grid: &Arc<Grid>, alpha: f64) -> Result<SampledPotential> {
    let v = p.sample_v(grid)?.into_values();
    let w = match p {
        PotentialSpec::CustomSampled { w, .. } => {
            if let Some(w) = w {
                if w.len() != grid.len() {
                    return Err(Error::InvalidGrid("potential W samples do not match the grid".into()));
                }
            }
            w.clone()
        }
        _ => Some(crate::model::potential_eval(p, grid, alpha)?.w.into_values()),
    };
    let max_abs_v = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(SampledPotential { v, w, max_abs_v })
}
