use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::FiberData;
use crate::functionals::{lagrange_lambda, seminorms};
use crate::spectral::{boundary_mass_fraction, mass};

use super::{pohozaev_ratio, ProblemSpec, SolveResult, BOUNDARY_TOL};

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// False when the check does not apply to this problem class.
    pub applicable: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let tag = match (c.applicable, c.passed) {
                (false, _) => "SKIP",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            writeln!(f, "[{tag}] {}: {}", c.name, c.detail)?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        applicable: true,
        detail,
    }
}

fn skipped(name: &str, detail: String) -> Check {
    Check {
        name: name.into(),
        passed: true,
        applicable: false,
        detail,
    }
}

/// Checks a solution against the structural identities it must satisfy.
///
/// The multiplier checks use the stored `result.lambda`, so a record whose
/// multiplier was altered after solving is caught. The multiplier sign and the
/// fiber concavity only apply to the saddle-type problems (no potential or a
/// negative well); for a coercive trap the solution is a local minimizer on the
/// sphere and both are reported as skipped.
pub fn verify_solution(result: &SolveResult, spec: &ProblemSpec) -> Result<VerificationReport> {
    let u = &result.u;
    spec.check_grid(u)?;
    if !(mass(u) > 1e-14) || u.max_abs() == 0.0 {
        return Err(Error::ZeroMass);
    }
    let saddle = super::uses_projection(spec);
    let mut checks = Vec::new();

    let tol_p = if spec.potential().is_none() { 1e-6 } else { 1e-4 };
    checks.push(match pohozaev_ratio(u, spec) {
        Ok(r) => check(
            "pohozaev",
            r.abs() < tol_p,
            format!("|P|/(A1+A2) = {:.3e} (limit {tol_p:.0e})", r.abs()),
        ),
        Err(e) => check("pohozaev", false, e.to_string()),
    });

    let recomputed = lagrange_lambda(u, spec)?;
    let gap = (result.lambda - recomputed).abs();
    checks.push(check(
        "lambda_consistent",
        gap <= 1e-6 * recomputed.abs().max(1.0),
        format!("stored {:.9e}, recomputed from u {recomputed:.9e}", result.lambda),
    ));

    if saddle {
        checks.push(check(
            "lambda_positive",
            result.lambda > 0.0,
            if result.lambda > 0.0 {
                format!("lambda = {:.9e}", result.lambda)
            } else {
                format!(
                    "lambda = {:.9e} <= 0: no nontrivial solution exists for a nonpositive multiplier",
                    result.lambda
                )
            },
        ));
        checks.push(match FiberData::new(u, spec, true) {
            Ok(data) => {
                let c = data.psi_second(1.0);
                check("fiber_concavity", c < -1e-8, format!("psi''(1) = {c:.6e}"))
            }
            Err(e) => check("fiber_concavity", false, e.to_string()),
        });
    } else {
        checks.push(skipped(
            "lambda_positive",
            format!("lambda = {:.9e}; sign not constrained for a trapping potential", result.lambda),
        ));
        checks.push(skipped(
            "fiber_concavity",
            "minimizer on the sphere, not a fiber maximum".into(),
        ));
    }

    let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
    let floor = spec.params.delta_sq_floor;
    checks.push(check(
        "gradient_floor",
        a1 + a2 >= floor,
        format!("A1 + A2 = {:.6e} (floor {floor:.1e})", a1 + a2),
    ));

    let merr = (mass(u) - spec.mass).abs();
    let bfrac = boundary_mass_fraction(u);
    checks.push(check(
        "mass",
        merr < 1e-10 * spec.mass && bfrac < BOUNDARY_TOL,
        format!("|mass - a| = {merr:.3e}, boundary fraction = {bfrac:.3e}"),
    ));
    Ok(VerificationReport { checks })
}
