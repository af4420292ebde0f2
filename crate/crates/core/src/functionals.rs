//! Energies, Pohozaev functionals, the Euler–Lagrange gradient and the Lagrange multiplier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::spectral::{apply_symbol, frac_symbol, mass, Field};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyVariant {
    I,
    J,
    /// `I + (λ/2)|u|₂²`.
    ILambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PohozaevVariant {
    PInf,
    P,
}

/// Energy parts: `kin_i = ½|∇_{s_i}u|²`, `pot = ½∫Vu²`, `nl = ∫G(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kin1: f64,
    pub kin2: f64,
    pub pot: f64,
    pub nl: f64,
    pub i: f64,
    pub j: f64,
    pub i_lambda: Option<f64>,
    /// Value of the requested variant.
    pub total: f64,
}

/// `(|∇_{s₁}u|², |∇_{s₂}u|²)` from a single spectrum pass.
pub fn seminorms(u: &Field, s1: f64, s2: f64) -> (f64, f64) {
    let g = u.grid();
    let vol = g.box_length().powi(g.dim() as i32);
    let (mut a1, mut a2) = (0.0, 0.0);
    for (c, &k2) in u.spectrum().iter().zip(g.xi_sq()) {
        if k2 == 0.0 {
            continue;
        }
        let e = c.norm_sqr();
        a1 += frac_symbol(k2, s1) * e;
        a2 += frac_symbol(k2, s2) * e;
    }
    (vol * a1, vol * a2)
}

pub(crate) fn mixed_symbol(spec: &ProblemSpec) -> Vec<f64> {
    spec.grid()
        .xi_sq()
        .iter()
        .map(|&k2| frac_symbol(k2, spec.s1()) + frac_symbol(k2, spec.s2()))
        .collect()
}

fn weighted(u: &Field, w: &[f64]) -> f64 {
    crate::spectral::weighted_mass(u, w)
}

pub fn energy(u: &Field, spec: &ProblemSpec, variant: EnergyVariant) -> Result<EnergyBreakdown> {
    spec.check_grid(u)?;
    let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
    let h = u.grid().cell_volume();
    let n = spec.nonlinearity();
    let nl = h * u.values().iter().map(|&x| n.big_g(x)).sum::<f64>();
    let pot = if spec.potential().is_none() {
        0.0
    } else {
        0.5 * weighted(u, spec.v_samples())
    };
    let i = 0.5 * a1 + 0.5 * a2 - nl;
    let j = if spec.potential().is_none() { i } else { i + pot };
    let i_lambda = match variant {
        EnergyVariant::ILambda(l) => Some(i + 0.5 * l * mass(u)),
        _ => None,
    };
    let total = match variant {
        EnergyVariant::I => i,
        EnergyVariant::J => j,
        EnergyVariant::ILambda(_) => i_lambda.unwrap_or(i),
    };
    Ok(EnergyBreakdown {
        kin1: 0.5 * a1,
        kin2: 0.5 * a2,
        pot,
        nl,
        i,
        j,
        i_lambda,
        total,
    })
}

/// `P_∞ = s₁|∇_{s₁}u|² + s₂|∇_{s₂}u|² - d∫G̃(u)` and `P = P_∞ - ∫W u²`.
pub fn pohozaev(u: &Field, spec: &ProblemSpec, variant: PohozaevVariant) -> Result<f64> {
    spec.check_grid(u)?;
    let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
    let d = spec.dim() as f64;
    let h = u.grid().cell_volume();
    let n = spec.nonlinearity();
    let gt = h * u.values().iter().map(|&x| n.eval(x).g_tilde).sum::<f64>();
    let p_inf = spec.s1() * a1 + spec.s2() * a2 - d * gt;
    match variant {
        PohozaevVariant::PInf => Ok(p_inf),
        PohozaevVariant::P if spec.potential().is_none() => Ok(p_inf),
        PohozaevVariant::P => Ok(p_inf - weighted(u, spec.w_samples()?)),
    }
}

/// `J'(u) = (-Δ)^{s₁}u + (-Δ)^{s₂}u + Vu - g(u)`.
pub fn el_gradient(u: &Field, spec: &ProblemSpec) -> Result<Field> {
    spec.check_grid(u)?;
    let sym = mixed_symbol(spec);
    el_gradient_with(u, spec, &sym)
}

pub(crate) fn el_gradient_with(u: &Field, spec: &ProblemSpec, sym: &[f64]) -> Result<Field> {
    let lin = apply_symbol(u, sym)?;
    let n = spec.nonlinearity();
    let v = spec.v_samples();
    let values = lin
        .values()
        .iter()
        .zip(u.values())
        .zip(v)
        .map(|((l, &x), vx)| l + vx * x - n.g(x))
        .collect();
    Field::new(u.grid().clone(), values)
}

/// `λ = (∫g(u)u - |∇_{s₁}u|² - |∇_{s₂}u|² - ∫Vu²) / |u|₂²`.
pub fn lagrange_lambda(u: &Field, spec: &ProblemSpec) -> Result<f64> {
    spec.check_grid(u)?;
    let m = mass(u);
    if !(m > 1e-14) {
        return Err(Error::ZeroMass);
    }
    let (a1, a2) = seminorms(u, spec.s1(), spec.s2());
    let h = u.grid().cell_volume();
    let n = spec.nonlinearity();
    let gu = h * u.values().iter().map(|&x| n.g(x) * x).sum::<f64>();
    let vu = if spec.potential().is_none() {
        0.0
    } else {
        weighted(u, spec.v_samples())
    };
    Ok((gu - a1 - a2 - vu) / m)
}

/// `‖J'(u) + λu‖₂ / ‖u‖₂`.
pub fn el_residual(u: &Field, spec: &ProblemSpec, lambda: f64) -> Result<f64> {
    let r = el_gradient(u, spec)?.axpy(lambda, u)?;
    let m = mass(u);
    if !(m > 0.0) {
        return Err(Error::ZeroMass);
    }
    Ok((mass(&r) / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NonlinearitySpec, PotentialSpec};
    use crate::sampling::LocalizedSampler;
    use crate::spectral::{make_grid, seminorm_sq};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cos_problem(s1: f64, s2: f64) -> (ProblemSpec, Field) {
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        let spec = ProblemSpec::new(
            g.clone(),
            s1,
            s2,
            1.0,
            NonlinearitySpec::single(1.0, 4.0),
            PotentialSpec::None,
        )
        .unwrap();
        (spec, Field::from_fn(g, |[x, _]| x.cos()).unwrap())
    }

    #[test]
    fn energy_of_cos() {
        let (spec, u) = cos_problem(0.4, 0.8);
        let e = energy(&u, &spec, EnergyVariant::I).unwrap();
        assert!((e.kin1 - PI / 2.0).abs() < 1e-13);
        assert!((e.kin2 - PI / 2.0).abs() < 1e-13);
        assert!((e.nl - 3.0 * PI / 16.0).abs() < 1e-13);
        assert!((e.i - 13.0 * PI / 16.0).abs() < 1e-13);
        assert_eq!(e.i, e.j);
        let e = energy(&u, &spec, EnergyVariant::ILambda(2.0)).unwrap();
        assert!((e.total - (13.0 * PI / 16.0 + PI)).abs() < 1e-13);

        let z = Field::zeros(u.grid().clone());
        let e = energy(&z, &spec, EnergyVariant::J).unwrap();
        assert_eq!((e.kin1, e.kin2, e.pot, e.nl, e.total), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn pohozaev_of_cos() {
        let (spec, u) = cos_problem(0.4, 0.8);
        let p = pohozaev(&u, &spec, PohozaevVariant::PInf).unwrap();
        assert!((p - 1.0125 * PI).abs() < 1e-13);
        assert_eq!(p, pohozaev(&u, &spec, PohozaevVariant::P).unwrap());
        let z = Field::zeros(u.grid().clone());
        assert_eq!(pohozaev(&z, &spec, PohozaevVariant::P).unwrap(), 0.0);
    }

    #[test]
    fn gradient_of_cos_degenerate_orders() {
        let (spec, u) = cos_problem(0.5, 0.5);
        let g = el_gradient(&u, &spec).unwrap();
        for (idx, v) in g.values().iter().enumerate() {
            let c = u.grid().coordinate(idx).cos();
            assert!((v - (2.0 * c - c * c * c)).abs() < 1e-13);
        }
        let z = Field::zeros(u.grid().clone());
        assert_eq!(el_gradient(&z, &spec).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn lambda_homogeneity_and_zero_mass() {
        let g = make_grid(1, 256, 20.0).unwrap();
        let spec = ProblemSpec::new(
            g.clone(),
            0.4,
            0.8,
            1.0,
            NonlinearitySpec::single(1.0, 6.0),
            PotentialSpec::None,
        )
        .unwrap();
        let u = Field::from_fn(g.clone(), |[x, _]| (-x * x).exp()).unwrap();
        let (a1, a2) = (seminorm_sq(&u, 0.4).unwrap(), seminorm_sq(&u, 0.8).unwrap());
        let gu: f64 = g.cell_volume() * u.values().iter().map(|x| x.powi(6)).sum::<f64>();
        let m = mass(&u);
        for c in [0.3, 1.0, 2.5] {
            let l = lagrange_lambda(&u.scaled(c), &spec).unwrap();
            let oracle = (c.powi(6) * gu - c * c * (a1 + a2)) / (c * c * m);
            assert!((l - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
        }
        let tiny = u.scaled(1e-9);
        assert!(matches!(lagrange_lambda(&tiny, &spec), Err(Error::ZeroMass)));
    }

    #[test]
    fn gradient_matches_energy_differences() {
        let g = make_grid(1, 256, 20.0).unwrap();
        let spec = ProblemSpec::new(
            g.clone(),
            0.4,
            0.8,
            1.0,
            NonlinearitySpec::single(1.0, 6.0),
            PotentialSpec::NegativeWell { v0: 0.3, kappa: 1.5 },
        )
        .unwrap();
        let sampler = LocalizedSampler::for_grid(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = sampler.sample(&g, &mut rng);
        let grad = el_gradient(&u, &spec).unwrap();
        let eps = 1e-5;
        for _ in 0..20 {
            let h = sampler.sample(&g, &mut rng);
            let jp = energy(&u.axpy(eps, &h).unwrap(), &spec, EnergyVariant::J).unwrap().j;
            let jm = energy(&u.axpy(-eps, &h).unwrap(), &spec, EnergyVariant::J).unwrap().j;
            let fd = (jp - jm) / (2.0 * eps);
            let an = crate::spectral::inner(&grad, &h).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
        }
    }

    #[test]
    fn coercivity_on_pohozaev_manifold() {
        let g = make_grid(1, 1024, 40.0).unwrap();
        let spec = ProblemSpec::new(
            g.clone(),
            0.4,
            0.8,
            1.0,
            NonlinearitySpec::single(1.0, 6.0),
            PotentialSpec::None,
        )
        .unwrap();
        let sampler = LocalizedSampler::for_grid(&g).with_amplitude(1.5, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (alpha, beta) = (6.0, 6.0);
        let c = 0.4 / (2.0 * beta) * (alpha - 2.0 - 4.0 * 0.8);
        for _ in 0..10 {
            let u = sampler.sample(&g, &mut rng);
            let t = crate::fiber::find_t_star(&u, &spec, false).unwrap();
            if !(0.25..=4.0).contains(&t) {
                continue;
            }
            let v = crate::fiber::dilate(&u, t).unwrap();
            let e = energy(&v, &spec, EnergyVariant::I).unwrap();
            let (a1, a2) = seminorms(&v, 0.4, 0.8);
            assert!(e.i >= c * (a1 + a2) * (1.0 - 1e-3));
        }
    }
}
