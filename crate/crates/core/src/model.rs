//! Power nonlinearities, potential families and assumption arithmetic.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sampling::LocalizedSampler;
use crate::spectral::{frac_symbol, Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub mu: f64,
    pub p: f64,
}

/// `g(t) = Σ μ_i |t|^{p_i-2} t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NonlinearitySpec {
    pub terms: Vec<PowerTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearValues {
    pub g: f64,
    pub big_g: f64,
    pub g_tilde: f64,
    /// `G̃'(t)·t`.
    pub g_tilde_prime_t: f64,
}

impl NonlinearitySpec {
    pub fn single(mu: f64, p: f64) -> Self {
        NonlinearitySpec {
            terms: vec![PowerTerm { mu, p }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(invalid("nonlinearity", "at least one term required"));
        }
        for t in &self.terms {
            if !(t.mu > 0.0 && t.mu.is_finite()) {
                return Err(invalid("mu", format!("{} must be positive", t.mu)));
            }
            if !(t.p > 2.0 && t.p.is_finite()) {
                return Err(invalid("p", format!("{} must exceed 2", t.p)));
            }
        }
        Ok(())
    }

    /// Smallest exponent.
    pub fn alpha(&self) -> f64 {
        self.terms.iter().map(|t| t.p).fold(f64::INFINITY, f64::min)
    }

    /// Largest exponent.
    pub fn beta(&self) -> f64 {
        self.terms.iter().map(|t| t.p).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, t: f64) -> NonlinearValues {
        let a = t.abs();
        let mut v = NonlinearValues {
            g: 0.0,
            big_g: 0.0,
            g_tilde: 0.0,
            g_tilde_prime_t: 0.0,
        };
        if a == 0.0 {
            return v;
        }
        for term in &self.terms {
            let ap = a.powf(term.p);
            v.g += term.mu * ap / t;
            v.big_g += term.mu / term.p * ap;
            v.g_tilde += term.mu * (term.p - 2.0) / (2.0 * term.p) * ap;
            v.g_tilde_prime_t += term.mu * (term.p - 2.0) / 2.0 * ap;
        }
        v
    }

    pub fn g(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|term| term.mu * a.powf(term.p - 2.0))
            .sum::<f64>()
            * t
    }

    /// `g(t)/t`, finite at zero.
    pub fn g_over_t(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms.iter().map(|term| term.mu * a.powf(term.p - 2.0)).sum()
    }

    /// `g'(t) = Σ μ_i (p_i - 1) |t|^{p_i-2}`.
    pub fn g_prime(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms
            .iter()
            .map(|term| term.mu * (term.p - 1.0) * a.powf(term.p - 2.0))
            .sum()
    }

    pub fn big_g(&self, t: f64) -> f64 {
        let a = t.abs();
        self.terms.iter().map(|term| term.mu / term.p * a.powf(term.p)).sum()
    }
}

/// Potential families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    #[default]
    None,
    /// `V = -V₀ (1+|x|²)^{-κ}`.
    NegativeWell { v0: f64, kappa: f64 },
    /// `V = V₀ + ω²|x|²`.
    Coercive { v0: f64, omega: f64 },
    /// Grid samples of `V`; `w` and `y` samples enable the Pohozaev terms.
    CustomSampled {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<Vec<f64>>,
    },
}

/// Sampled `V`, `W = ½⟨∇V,x⟩` and `Y = (dα/2-d-1)W + ⟨∇W,x⟩`.
#[derive(Debug, Clone)]
pub struct PotentialFields {
    pub v: Field,
    pub w: Field,
    pub y: Field,
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("{v} must be positive")))
            }
        };
        match self {
            PotentialSpec::None => Ok(()),
            PotentialSpec::NegativeWell { v0, kappa } => {
                pos("v0", *v0)?;
                pos("kappa", *kappa)
            }
            PotentialSpec::Coercive { v0, omega } => {
                pos("v0", *v0)?;
                pos("omega", *omega)
            }
            PotentialSpec::CustomSampled { values, .. } => {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::NonFinite("potential samples"))
                }
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PotentialSpec::None)
    }

    pub fn is_coercive(&self) -> bool {
        matches!(self, PotentialSpec::Coercive { .. })
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, PotentialSpec::CustomSampled { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::None => "none",
            PotentialSpec::NegativeWell { .. } => "negative_well",
            PotentialSpec::Coercive { .. } => "coercive",
            PotentialSpec::CustomSampled { .. } => "custom_sampled",
        }
    }

    /// `V` at squared radius `r2`; `None` for sampled potentials.
    pub fn v_at(&self, r2: f64) -> Option<f64> {
        match *self {
            PotentialSpec::None => Some(0.0),
            PotentialSpec::NegativeWell { v0, kappa } => Some(-v0 * (1.0 + r2).powf(-kappa)),
            PotentialSpec::Coercive { v0, omega } => Some(v0 + omega * omega * r2),
            PotentialSpec::CustomSampled { .. } => None,
        }
    }

    /// `W = ½⟨∇V(x),x⟩` at squared radius `r2`.
    pub fn w_at(&self, r2: f64) -> Option<f64> {
        match *self {
            PotentialSpec::None => Some(0.0),
            PotentialSpec::NegativeWell { v0, kappa } => {
                Some(kappa * v0 * r2 * (1.0 + r2).powf(-kappa - 1.0))
            }
            PotentialSpec::Coercive { omega, .. } => Some(omega * omega * r2),
            PotentialSpec::CustomSampled { .. } => None,
        }
    }

    /// `⟨∇W(x),x⟩` at squared radius `r2`.
    pub fn grad_w_dot_x_at(&self, r2: f64) -> Option<f64> {
        match *self {
            PotentialSpec::None => Some(0.0),
            PotentialSpec::NegativeWell { v0, kappa } => Some(
                2.0 * kappa * v0 * r2 * (1.0 + r2).powf(-kappa - 2.0) * (1.0 - kappa * r2),
            ),
            PotentialSpec::Coercive { omega, .. } => Some(2.0 * omega * omega * r2),
            PotentialSpec::CustomSampled { .. } => None,
        }
    }

    /// Samples of `V` alone; available for every family.
    pub fn sample_v(&self, grid: &Arc<Grid>) -> Result<Field> {
        match self {
            PotentialSpec::CustomSampled { values, .. } => Field::new(grid.clone(), values.clone()),
            _ => Field::from_fn(grid.clone(), |[x, y]| self.v_at(x * x + y * y).unwrap_or(0.0)),
        }
    }
}

/// Samples `V`, `W` and `Y` on `grid`; `alpha` is the smallest nonlinearity exponent.
pub fn potential_eval(pspec: &PotentialSpec, grid: &Arc<Grid>, alpha: f64) -> Result<PotentialFields> {
    pspec.validate()?;
    let d = grid.dim() as f64;
    let c = d * alpha / 2.0 - d - 1.0;
    match pspec {
        PotentialSpec::CustomSampled { values, w, y } => match (w, y) {
            (Some(w), Some(y)) => Ok(PotentialFields {
                v: Field::new(grid.clone(), values.clone())?,
                w: Field::new(grid.clone(), w.clone())?,
                y: Field::new(grid.clone(), y.clone())?,
            }),
            _ => Err(Error::NoAnalyticPotential("custom_sampled")),
        },
        _ => {
            let v = pspec.sample_v(grid)?;
            let w = Field::from_fn(grid.clone(), |[x, y]| pspec.w_at(x * x + y * y).unwrap_or(0.0))?;
            let y = Field::from_fn(grid.clone(), |[x, y]| {
                let r2 = x * x + y * y;
                c * pspec.w_at(r2).unwrap_or(0.0) + pspec.grad_w_dot_x_at(r2).unwrap_or(0.0)
            })?;
            Ok(PotentialFields { v, w, y })
        }
    }
}

/// Verdicts of the structural and potential assumptions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `(2 + 4s₂/d, 2d/(d-2s₁))`; the upper end is infinite when `d ≤ 2s₁`.
    pub admissible_window: (f64, f64),
    pub g_window_ok: bool,
    /// `2s₁ < d < 2s₁s₂/(s₂-s₁)`.
    pub dimension_window_ok: bool,
    pub degenerate_orders: bool,
    pub sigma_hat: Option<[f64; 3]>,
    pub sigma_bounds: Option<[f64; 3]>,
    /// Verdicts for the three potential bounds, in order.
    pub sigma_ok: Option<[bool; 3]>,
    pub notes: Vec<String>,
}

impl AssumptionReport {
    pub fn admissible(&self) -> bool {
        self.g_window_ok
            && self.dimension_window_ok
            && self.sigma_ok.is_none_or(|v| v.iter().all(|&b| b))
    }
}

/// Checks the exponent window and the dimension window.
pub fn check_admissibility(d: usize, s1: f64, s2: f64, spec: &NonlinearitySpec) -> AssumptionReport {
    let df = d as f64;
    let lower = 2.0 + 4.0 * s2 / df;
    let upper = if df > 2.0 * s1 {
        2.0 * df / (df - 2.0 * s1)
    } else {
        f64::INFINITY
    };
    let (alpha, beta) = (spec.alpha(), spec.beta());
    let g_window_ok = lower < alpha && beta < upper;
    let dim_upper = if s2 > s1 {
        2.0 * s1 * s2 / (s2 - s1)
    } else {
        f64::INFINITY
    };
    let dimension_window_ok = 2.0 * s1 < df && df < dim_upper;
    let degenerate_orders = s1 == s2;
    let mut notes = Vec::new();
    if degenerate_orders {
        notes.push("degenerate: s1 = s2 is outside the model's scope, permitted for oracles".into());
    }
    if !g_window_ok {
        notes.push(format!(
            "exponents [{alpha}, {beta}] not inside the window ({lower}, {upper})"
        ));
    }
    if !dimension_window_ok {
        notes.push(format!("dimension {d} not inside ({}, {dim_upper})", 2.0 * s1));
    }
    AssumptionReport {
        admissible_window: (lower, upper),
        g_window_ok,
        dimension_window_ok,
        degenerate_orders,
        sigma_hat: None,
        sigma_bounds: None,
        sigma_ok: None,
        notes,
    }
}

/// Analytic right ends of the three σ brackets. The second depends on σ₁.
pub fn sigma_bounds(d: usize, s1: f64, s2: f64, alpha: f64, beta: f64, sigma1: f64) -> [f64; 3] {
    let df = d as f64;
    let b1 = (df * (alpha - 2.0) - 4.0) / (df * (alpha - 2.0));
    let b2 = (s1 - (beta - 2.0) * df / (2.0 * beta))
        .min(df * (alpha - 2.0) * (1.0 - sigma1) / 4.0 - s2);
    let b3 = s1 * s1 * (df * alpha / 2.0 - df - 2.0 * s2);
    [b1, b2, b3]
}

/// Lower estimates of σ₁, σ₂, σ₃: the largest Rayleigh quotients
/// `|∫Z u²| / (|∇_{s₁}u|² + |∇_{s₂}u|²)` for `Z ∈ {V, W, Y}` over random localized fields.
pub fn estimate_sigmas(
    pspec: &PotentialSpec,
    grid: &Arc<Grid>,
    s1: f64,
    s2: f64,
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<[f64; 3]> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    if pspec.is_none() {
        return Ok([0.0; 3]);
    }
    let pf = potential_eval(pspec, grid, alpha)?;
    let sym: Vec<f64> = grid
        .xi_sq()
        .iter()
        .map(|&k2| frac_symbol(k2, s1) + frac_symbol(k2, s2))
        .collect();
    let sampler = LocalizedSampler::for_grid(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = [0.0_f64; 3];
    for _ in 0..n_samples {
        let u = sampler.sample(grid, &mut rng);
        let denom = crate::spectral::quadratic_form(&u, &sym);
        for (b, z) in best.iter_mut().zip([&pf.v, &pf.w, &pf.y]) {
            let q = crate::spectral::weighted_mass(&u, z.values()).abs() / denom;
            *b = b.max(q);
        }
    }
    Ok(best)
}

/// Attaches σ estimates and verdicts to an admissibility report.
#[allow(clippy::too_many_arguments)]
pub fn attach_sigma_report(
    report: &mut AssumptionReport,
    pspec: &PotentialSpec,
    grid: &Arc<Grid>,
    s1: f64,
    s2: f64,
    spec: &NonlinearitySpec,
    n_samples: usize,
    seed: u64,
) -> Result<()> {
    if pspec.is_none() || pspec.is_coercive() {
        return Ok(());
    }
    let (alpha, beta) = (spec.alpha(), spec.beta());
    let hat = estimate_sigmas(pspec, grid, s1, s2, alpha, n_samples, seed)?;
    let bounds = sigma_bounds(grid.dim(), s1, s2, alpha, beta, hat[0]);
    let ok = [
        hat[0] >= 0.0 && hat[0] <= bounds[0],
        hat[1] > 0.0 && hat[1] < bounds[1],
        hat[2] >= 0.0 && hat[2] <= bounds[2],
    ];
    report.notes.push(
        "sigma estimates are sampled lower bounds: a pass is necessary, not sufficient".into(),
    );
    for (i, name) in ["sigma1", "sigma2", "sigma3"].iter().enumerate() {
        if !ok[i] {
            report.notes.push(format!(
                "{name}: estimate {:.6e} outside bracket (upper {:.6e})",
                hat[i], bounds[i]
            ));
        }
    }
    report.sigma_hat = Some(hat);
    report.sigma_bounds = Some(bounds);
    report.sigma_ok = Some(ok);
    Ok(())
}
