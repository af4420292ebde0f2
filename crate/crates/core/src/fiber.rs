//! The mass-preserving dilation `t*u = t^{d/2} u(t·)` and the energy along it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::seminorms;
use crate::problem::ProblemSpec;
use crate::spectral::{boundary_mass_fraction, interpolate_lattice, Field};

/// Largest boundary-shell mass fraction accepted by [`dilate`].
pub const DILATION_BOUNDARY_TOL: f64 = 1e-6;
/// Bracket limit for the critical dilation.
pub const T_SEARCH_LIMIT: f64 = 1048576.0;

/// Sampled fiber maps and the located critical dilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberDiagnostics {
    pub t_samples: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_prime: Vec<f64>,
    pub t_star: Option<f64>,
    pub psi_second_at_star: Option<f64>,
    pub sign_changes: usize,
}

/// `t^{d/2} u(t x)` by band-limited interpolation; zero where `t x` leaves the box.
pub fn dilate(u: &Field, t: f64) -> Result<Field> {
    if !(1.0 / 16.0..=16.0).contains(&t) {
        return Err(Error::DilationRange(t));
    }
    let fraction = boundary_mass_fraction(u);
    if fraction > DILATION_BOUNDARY_TOL {
        return Err(Error::BoundaryMass {
            fraction,
            threshold: DILATION_BOUNDARY_TOL,
        });
    }
    if t == 1.0 {
        return Ok(u.clone());
    }
    let g = u.grid();
    let half = 0.5 * g.box_length();
    let values = interpolate_lattice(u, -half * t, g.spacing() * t, g.n_per_dim());
    let scale = t.powf(0.5 * g.dim() as f64);
    Field::new(g.clone(), values.into_iter().map(|v| v * scale).collect())
}

/// Moments of `u` from which `Ψ_u` follows in closed form for power nonlinearities.
pub(crate) struct FiberData<'a> {
    spec: &'a ProblemSpec,
    a1: f64,
    a2: f64,
    /// `∫|u|^{p_i}` per nonlinearity term.
    moments: Vec<f64>,
    /// `(|x|², u² h^d)` for the potential integrals.
    weights: Vec<(f64, f64)>,
    with_potential: bool,
}

impl<'a> FiberData<'a> {
    pub(crate) fn new(u: &Field, spec: &'a ProblemSpec, with_potential: bool) -> Result<Self> {
        spec.check_grid(u)?;
        let with_potential = with_potential && !spec.potential().is_none();
        if with_potential && !spec.potential().is_analytic() {
            return Err(Error::NoAnalyticPotential("custom_sampled"));
        }
        let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
        let h = u.grid().cell_volume();
        let moments = spec
            .nonlinearity()
            .terms
            .iter()
            .map(|term| h * u.values().iter().map(|x| x.abs().powf(term.p)).sum::<f64>())
            .collect();
        let weights = if with_potential {
            let m: f64 = h * u.values().iter().map(|x| x * x).sum::<f64>();
            let g = u.grid();
            u.values()
                .iter()
                .enumerate()
                .map(|(i, x)| (g.radius_sq(i), h * x * x))
                .filter(|&(_, w)| w > 1e-30 * m)
                .collect()
        } else {
            Vec::new()
        };
        Ok(FiberData {
            spec,
            a1,
            a2,
            moments,
            weights,
            with_potential,
        })
    }

    pub(crate) fn psi(&self, t: f64) -> f64 {
        let (s1, s2) = (self.spec.s1(), self.spec.s2());
        let d = self.spec.dim() as f64;
        let mut v = 0.5 * t.powf(2.0 * s1) * self.a1 + 0.5 * t.powf(2.0 * s2) * self.a2;
        for (term, m) in self.spec.nonlinearity().terms.iter().zip(&self.moments) {
            v -= term.mu / term.p * t.powf(d * term.p / 2.0 - d) * m;
        }
        if self.with_potential {
            let pot = self.spec.potential();
            let inv = 1.0 / (t * t);
            v += 0.5
                * self
                    .weights
                    .iter()
                    .map(|&(r2, w)| pot.v_at(r2 * inv).unwrap_or(0.0) * w)
                    .sum::<f64>();
        }
        v
    }

    pub(crate) fn psi_prime(&self, t: f64) -> f64 {
        let (s1, s2) = (self.spec.s1(), self.spec.s2());
        let d = self.spec.dim() as f64;
        let mut v = s1 * t.powf(2.0 * s1 - 1.0) * self.a1 + s2 * t.powf(2.0 * s2 - 1.0) * self.a2;
        for (term, m) in self.spec.nonlinearity().terms.iter().zip(&self.moments) {
            let c = term.mu * (term.p - 2.0) / (2.0 * term.p);
            v -= d * c * t.powf(d * term.p / 2.0 - d - 1.0) * m;
        }
        if self.with_potential {
            let pot = self.spec.potential();
            let inv = 1.0 / (t * t);
            v -= self
                .weights
                .iter()
                .map(|&(r2, w)| pot.w_at(r2 * inv).unwrap_or(0.0) * w)
                .sum::<f64>()
                / t;
        }
        v
    }

    /// Central difference of `Ψ'` with relative step `1e-4`.
    pub(crate) fn psi_second(&self, t: f64) -> f64 {
        let e = 1e-4 * t;
        (self.psi_prime(t + e) - self.psi_prime(t - e)) / (2.0 * e)
    }

    pub(crate) fn t_star(&self) -> Result<f64> {
        let (mut lo, mut hi) = (0.5, 2.0);
        while self.psi_prime(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo < 1.0 / T_SEARCH_LIMIT {
                return Err(Error::FiberDegeneracy);
            }
        }
        while self.psi_prime(hi) >= 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > T_SEARCH_LIMIT {
                return Err(Error::FiberDegeneracy);
            }
        }
        // bisection in log t
        while hi / lo - 1.0 > 1e-13 {
            let mid = (lo * hi).sqrt();
            let f = self.psi_prime(mid);
            if f > 0.0 {
                lo = mid;
            } else if f < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        let t = (lo * hi).sqrt();
        let grid = log_grid(
            (t / 100.0).max(1.0 / T_SEARCH_LIMIT),
            (t * 100.0).min(T_SEARCH_LIMIT),
            81,
        )?;
        let changes = sign_changes(&grid.iter().map(|&s| self.psi_prime(s)).collect::<Vec<_>>());
        if changes > 1 {
            return Err(Error::NonUniqueCriticalDilation(changes));
        }
        let curv = self.psi_second(t);
        if !(curv < 0.0) {
            return Err(Error::NonConcaveCritical(curv));
        }
        Ok(t)
    }
}

/// `(Ψ_u(t), Ψ'_u(t))`, or the potential-free pair when `with_potential` is off.
pub fn psi_eval(u: &Field, t: f64, spec: &ProblemSpec, with_potential: bool) -> Result<(f64, f64)> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("{t} must be positive")));
    }
    let data = FiberData::new(u, spec, with_potential)?;
    Ok((data.psi(t), data.psi_prime(t)))
}

/// Unique root of `Ψ'_u`, bracketed geometrically from `[1/2, 2]` and bisected.
pub fn find_t_star(u: &Field, spec: &ProblemSpec, with_potential: bool) -> Result<f64> {
    if u.max_abs() == 0.0 {
        return Err(Error::ZeroMass);
    }
    FiberData::new(u, spec, with_potential)?.t_star()
}

/// Dilation of `u` onto the Pohozaev manifold: returns `(t_u, t_u * u)`.
pub fn projection(u: &Field, spec: &ProblemSpec, with_potential: bool) -> Result<(f64, Field)> {
    let t = find_t_star(u, spec, with_potential)?;
    Ok((t, dilate(u, t)?))
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(invalid("t_grid", format!("need 0 < {lo} < {hi} and n = {n} >= 2")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

fn sign_changes(v: &[f64]) -> usize {
    let signs: Vec<f64> = v.iter().filter(|x| **x != 0.0).map(|x| x.signum()).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Samples `Ψ` and `Ψ'` over `t_grid` and locates the critical dilation.
pub fn fiber_scan(
    u: &Field,
    spec: &ProblemSpec,
    with_potential: bool,
    t_grid: &[f64],
) -> Result<FiberDiagnostics> {
    if t_grid.len() < 16 || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid[0] <= 0.0 {
        return Err(invalid("t_grid", "need at least 16 positive increasing points"));
    }
    let data = FiberData::new(u, spec, with_potential)?;
    let psi: Vec<f64> = t_grid.iter().map(|&t| data.psi(t)).collect();
    let psi_prime: Vec<f64> = t_grid.iter().map(|&t| data.psi_prime(t)).collect();
    let changes = sign_changes(&psi_prime);
    let mut t_star = None;
    if changes >= 1 {
        if let Some(i) = (0..t_grid.len() - 1).find(|&i| psi_prime[i] > 0.0 && psi_prime[i + 1] <= 0.0) {
            let (mut lo, mut hi) = (t_grid[i], t_grid[i + 1]);
            while hi / lo - 1.0 > 1e-13 {
                let mid = (lo * hi).sqrt();
                if data.psi_prime(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            t_star = Some((lo * hi).sqrt());
        }
    }
    Ok(FiberDiagnostics {
        t_samples: t_grid.to_vec(),
        psi,
        psi_prime,
        t_star,
        psi_second_at_star: t_star.map(|t| data.psi_second(t)),
        sign_changes: changes,
    })
}
