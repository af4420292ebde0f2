//! Uniform periodic grids and Fourier-multiplier calculus.
//!
//! Spectral coefficients are normalized so that `c_k = N^{-d} Σ_j u_j e^{-2πi j·k/N}`;
//! with that convention Parseval reads `∫u² = L^d Σ|c_k|²` and the fractional
//! seminorm is `|∇_s u|² = L^d Σ |ξ_k|^{2s} |c_k|²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Fraction of the box (per side) treated as the boundary shell.
pub const BOUNDARY_SHELL: f64 = 0.1;

pub struct Grid {
    dim: usize,
    n_per_dim: usize,
    box_length: f64,
    spacing: f64,
    wavenumbers: Vec<f64>,
    xi_sq: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("n_per_dim", &self.n_per_dim)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.n_per_dim == other.n_per_dim
            && self.box_length == other.box_length
    }
}

/// Builds a `d`-dimensional periodic grid with `n_per_dim` points per axis on a box of side `box_length`.
pub fn make_grid(dim: usize, n_per_dim: usize, box_length: f64) -> Result<Arc<Grid>> {
    if dim != 1 && dim != 2 {
        return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
    }
    if n_per_dim < 8 || !n_per_dim.is_power_of_two() {
        return Err(Error::InvalidGrid(format!(
            "n_per_dim = {n_per_dim} must be a power of two >= 8"
        )));
    }
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(Error::InvalidGrid(format!("box_length = {box_length} must be positive")));
    }
    let n = n_per_dim;
    let wavenumbers: Vec<f64> = (0..n)
        .map(|j| {
            let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * k / box_length
        })
        .collect();
    let xi_sq = if dim == 1 {
        wavenumbers.iter().map(|k| k * k).collect()
    } else {
        let mut v = Vec::with_capacity(n * n);
        for kx in &wavenumbers {
            for ky in &wavenumbers {
                v.push(kx * kx + ky * ky);
            }
        }
        v
    };
    let mut planner = FftPlanner::new();
    Ok(Arc::new(Grid {
        dim,
        n_per_dim,
        box_length,
        spacing: box_length / n as f64,
        wavenumbers,
        xi_sq,
        fft: planner.plan_fft_forward(n),
        ifft: planner.plan_fft_inverse(n),
    }))
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n_per_dim
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.n_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one cell, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Per-axis angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// `|ξ|²` for every spectral index, FFT order, row-major.
    pub fn xi_sq(&self) -> &[f64] {
        &self.xi_sq
    }

    /// Axis coordinate `x_j = -L/2 + j h`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.box_length + j as f64 * self.spacing
    }

    pub fn axis_points(&self) -> Vec<f64> {
        (0..self.n_per_dim).map(|j| self.coordinate(j)).collect()
    }

    /// Coordinates of flat index `idx`; the second entry is zero in 1-D.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coordinate(idx), 0.0]
        } else {
            let n = self.n_per_dim;
            [self.coordinate(idx / n), self.coordinate(idx % n)]
        }
    }

    pub fn radius_sq(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x * x + y * y
    }

    /// Samples `f(x)` on every grid point.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(self.point(i))).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self == other
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.ifft } else { &self.fft };
        let n = self.n_per_dim;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if self.dim == 2 {
            let mut t = transpose(data, n);
            plan.process_with_scratch(&mut t, &mut scratch);
            data.copy_from_slice(&transpose(&t, n));
        }
    }

    /// Normalized forward transform of real samples.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        data
    }

    /// Synthesis `Σ_k c_k e^{2πi j·k/N}`; inverse of [`Grid::forward`].
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, true);
        data
    }

    /// Evaluates `|ξ|^{2s}`-type symbols on the spectral grid.
    pub fn symbol(&self, m: &MultiplierSpec) -> Vec<f64> {
        self.xi_sq.iter().map(|&k2| m.eval(k2)).collect()
    }
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    out[j * n + i] = data[i * n + j];
                }
            }
        }
    }
    out
}

/// Fourier multipliers acting on fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierSpec {
    /// `|ξ|^{2s}`; annihilates constants.
    FracLap { s: f64 },
    /// `(|ξ|^{2s} + c)^{-1}`.
    HelmholtzInverse { s: f64, c: f64 },
    /// `(1 + τ(|ξ|^{2s₁} + |ξ|^{2s₂}))^{-1}`.
    FlowInverse { s1: f64, s2: f64, tau: f64 },
}

fn check_order(name: &'static str, s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{s} not in (0, 1)")))
    }
}

impl MultiplierSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MultiplierSpec::FracLap { s } => check_order("s", s),
            MultiplierSpec::HelmholtzInverse { s, c } => {
                check_order("s", s)?;
                if c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("c", format!("{c} must be positive")))
                }
            }
            MultiplierSpec::FlowInverse { s1, s2, tau } => {
                check_order("s1", s1)?;
                check_order("s2", s2)?;
                if tau > 0.0 && tau.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("tau", format!("{tau} must be positive")))
                }
            }
        }
    }

    /// Symbol value at `|ξ|² = xi_sq`.
    pub fn eval(&self, xi_sq: f64) -> f64 {
        match *self {
            MultiplierSpec::FracLap { s } => frac_symbol(xi_sq, s),
            MultiplierSpec::HelmholtzInverse { s, c } => 1.0 / (frac_symbol(xi_sq, s) + c),
            MultiplierSpec::FlowInverse { s1, s2, tau } => {
                1.0 / (1.0 + tau * (frac_symbol(xi_sq, s1) + frac_symbol(xi_sq, s2)))
            }
        }
    }
}

/// `|ξ|^{2s}` from `|ξ|²`, with the zero frequency mapped to zero.
#[inline]
pub fn frac_symbol(xi_sq: f64, s: f64) -> f64 {
    if xi_sq == 0.0 {
        0.0
    } else {
        xi_sq.powf(s)
    }
}

/// Real scalar field on a periodic grid. Values are immutable; the spectrum is computed on demand.
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Field {
            grid: self.grid.clone(),
            values: self.values.clone(),
            spectrum,
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("len", &self.values.len())
            .finish()
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field {
            grid,
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid,
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Field::from_parts(grid, vec![0.0; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        Field::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Normalized DFT coefficients, cached after the first call.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    pub fn has_cached_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    pub fn scaled(&self, c: f64) -> Field {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.iter().map(|z| z * c).collect());
        }
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            spectrum,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Field) -> Result<Field> {
        ensure_same_grid(self, other)?;
        Field::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Rescales onto the sphere `|u|₂² = a`.
    pub fn normalized_to(&self, a: f64) -> Result<Field> {
        let m = mass(self);
        if !(m > 1e-300) {
            return Err(Error::ZeroMass);
        }
        Ok(self.scaled((a / m).sqrt()))
    }
}

pub(crate) fn ensure_same_grid(u: &Field, v: &Field) -> Result<()> {
    if u.grid.same_as(&v.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Applies a Fourier multiplier; the result must be real to round-off.
pub fn apply_multiplier(u: &Field, m: &MultiplierSpec) -> Result<Field> {
    m.validate()?;
    let symbol = u.grid.symbol(m);
    apply_symbol(u, &symbol)
}

/// Applies precomputed symbol values (FFT order) to `u`.
pub fn apply_symbol(u: &Field, symbol: &[f64]) -> Result<Field> {
    let coeffs: Vec<Complex64> = u.spectrum().iter().zip(symbol).map(|(c, s)| c * s).collect();
    let out = u.grid.inverse(&coeffs);
    let (mut re2, mut im2) = (0.0, 0.0);
    let values: Vec<f64> = out
        .iter()
        .map(|z| {
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            z.re
        })
        .collect();
    let total = re2 + im2;
    if total > 0.0 {
        let residue = (im2 / total).sqrt();
        if residue > 1e-10 {
            return Err(Error::ImaginaryResidue { residue });
        }
    }
    let field = Field::new(u.grid.clone(), values)?;
    let _ = field.spectrum.set(coeffs);
    Ok(field)
}

/// `L^d Σ symbol·|c|²`, the quadratic form of a real symbol.
pub fn quadratic_form(u: &Field, symbol: &[f64]) -> f64 {
    let vol = u.grid.box_length.powi(u.grid.dim as i32);
    vol * u
        .spectrum()
        .iter()
        .zip(symbol)
        .map(|(c, s)| s * c.norm_sqr())
        .sum::<f64>()
}

/// `|∇_s u|₂² = Σ |ξ|^{2s} |û(ξ)|²`.
pub fn seminorm_sq(u: &Field, s: f64) -> Result<f64> {
    check_order("s", s)?;
    let vol = u.grid.box_length.powi(u.grid.dim as i32);
    Ok(vol
        * u.spectrum()
            .iter()
            .zip(u.grid.xi_sq())
            .map(|(c, &k2)| frac_symbol(k2, s) * c.norm_sqr())
            .sum::<f64>())
}

/// `(Σ|u_j|^p h^d)^{1/p}`.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(invalid("p", format!("{p} must be >= 1")));
    }
    let h = u.grid.cell_volume();
    let sum: f64 = if p == 2.0 {
        u.values.iter().map(|v| v * v).sum()
    } else {
        u.values.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((sum * h).powf(1.0 / p))
}

/// `|u|₂²`.
pub fn mass(u: &Field) -> f64 {
    u.grid.cell_volume() * u.values.iter().map(|v| v * v).sum::<f64>()
}

/// `∫ u v`.
pub fn inner(u: &Field, v: &Field) -> Result<f64> {
    ensure_same_grid(u, v)?;
    Ok(inner_slices(u.grid(), &u.values, &v.values))
}

pub(crate) fn inner_slices(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    grid.cell_volume() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// `∫ w u²` for a sampled weight.
pub fn weighted_mass(u: &Field, weight: &[f64]) -> f64 {
    u.grid.cell_volume() * u.values.iter().zip(weight).map(|(v, w)| w * v * v).sum::<f64>()
}

/// Share of `|u|₂²` lying in the outer shell `max_i |x_i| ≥ (1/2 - 0.1) L`.
pub fn boundary_mass_fraction(u: &Field) -> f64 {
    let g = &u.grid;
    let cut = (0.5 - BOUNDARY_SHELL) * g.box_length;
    let total: f64 = u.values.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    let outer: f64 = u
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let [x, y] = g.point(*i);
            x.abs() >= cut || y.abs() >= cut
        })
        .map(|(_, v)| v * v)
        .sum();
    outer / total
}

/// Symmetrizes under the point group of the grid: even reflection in 1-D,
/// the eight symmetries of the square in 2-D.
pub fn symmetrize(u: &Field) -> Field {
    let g = &u.grid;
    let n = g.n_per_dim;
    let refl = |j: usize| (n - j) % n;
    let v = &u.values;
    let values = if g.dim == 1 {
        (0..n).map(|j| 0.5 * (v[j] + v[refl(j)])).collect()
    } else {
        let at = |i: usize, j: usize| v[i * n + j];
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (ri, rj) = (refl(i), refl(j));
                out[i * n + j] = 0.125
                    * (at(i, j)
                        + at(ri, j)
                        + at(i, rj)
                        + at(ri, rj)
                        + at(j, i)
                        + at(rj, i)
                        + at(j, ri)
                        + at(rj, ri));
            }
        }
        out
    };
    Field::from_parts(g.clone(), values)
}

/// Evaluates the band-limited interpolant of `u` on the lattice
/// `y_j = start + j·step` (per axis, `count` points per axis).
///
/// Outside the source box the periodic interpolant is faded out smoothly over a
/// distance `BOUNDARY_SHELL·L` and is zero beyond, so a localized field is
/// continued by its own (wrapped) tail instead of being cut off with a jump.
///
/// Runs as a chirp-z transform per axis.
pub fn interpolate_lattice(u: &Field, start: f64, step: f64, count: usize) -> Vec<f64> {
    let g = &u.grid;
    let n = g.n_per_dim;
    let half = 0.5 * g.box_length;
    let weight: Vec<f64> = (0..count)
        .map(|j| taper(((start + j as f64 * step).abs() - half) / (BOUNDARY_SHELL * g.box_length)))
        .collect();
    let chirp = Chirp::new(n, count, g.box_length, start, step);
    let coeffs = u.spectrum();
    if g.dim == 1 {
        let line = chirp.eval(coeffs);
        return line
            .iter()
            .zip(&weight)
            .map(|(z, &w)| if w > 0.0 { w * z.re } else { 0.0 })
            .collect();
    }
    // rows: evaluate along y for every kx
    let mut partial = vec![Complex64::new(0.0, 0.0); n * count];
    for kx in 0..n {
        let row = chirp.eval(&coeffs[kx * n..(kx + 1) * n]);
        for j in 0..count {
            partial[j * n + kx] = row[j];
        }
    }
    let mut out = vec![0.0; count * count];
    for j in 0..count {
        if weight[j] == 0.0 {
            continue;
        }
        let col = chirp.eval(&partial[j * n..(j + 1) * n]);
        for i in 0..count {
            if weight[i] > 0.0 {
                out[i * count + j] = weight[i] * weight[j] * col[i].re;
            }
        }
    }
    out
}

/// Smooth step: 1 for `e ≤ 0`, 0 for `e ≥ 1`, C^∞ in between.
fn taper(e: f64) -> f64 {
    if e <= 0.0 {
        return 1.0;
    }
    if e >= 1.0 {
        return 0.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    f(1.0 - e) / (f(1.0 - e) + f(e))
}

/// Band-limited transfer of `u` onto `target` (same dimension), tapered outside the source box.
pub fn resample(u: &Field, target: &Arc<Grid>) -> Result<Field> {
    if target.dim() != u.grid.dim {
        return Err(Error::GridMismatch);
    }
    if target.same_as(&u.grid) {
        return Ok(Field::from_parts(target.clone(), u.values.clone()));
    }
    let values = interpolate_lattice(
        u,
        -0.5 * target.box_length(),
        target.spacing(),
        target.n_per_dim(),
    );
    Field::new(target.clone(), values)
}

/// Bluestein evaluation of `Σ_k c_k e^{i k ω (y_j + L/2)}` on a uniform target lattice.
struct Chirp {
    n: usize,
    count: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex64>,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
}

impl Chirp {
    fn new(n: usize, count: usize, box_length: f64, start: f64, step: f64) -> Self {
        let omega = 2.0 * PI / box_length;
        let phi0 = omega * (start + 0.5 * box_length);
        let delta = omega * step;
        let size = (n + count - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let ifft = planner.plan_fft_inverse(size);
        let cis = |a: f64| Complex64::from_polar(1.0, a);
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        for (m, k) in kernel.iter_mut().enumerate().take(count) {
            let mf = m as f64;
            *k = cis(-0.5 * delta * mf * mf);
        }
        for m in 1..n {
            let mf = m as f64;
            kernel[size - m] = cis(-0.5 * delta * mf * mf);
        }
        fft.process(&mut kernel);
        let pre = (0..n)
            .map(|m| {
                let mf = m as f64;
                cis(mf * phi0 + 0.5 * delta * mf * mf)
            })
            .collect();
        let shift = (n / 2) as f64;
        let post = (0..count)
            .map(|j| {
                let jf = j as f64;
                cis(-shift * (phi0 + delta * jf) + 0.5 * delta * jf * jf)
            })
            .collect();
        Chirp {
            n,
            count,
            fft,
            ifft,
            kernel_hat: kernel,
            pre,
            post,
        }
    }

    /// `line` holds coefficients in FFT order.
    fn eval(&self, line: &[Complex64]) -> Vec<Complex64> {
        let size = self.kernel_hat.len();
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        let half = self.n / 2;
        for (idx, c) in line.iter().enumerate() {
            let m = (idx + half) % self.n;
            buf[m] = c * self.pre[m];
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / size as f64;
        (0..self.count).map(|j| buf[j] * self.post[j] * scale).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, rel: f64) -> bool {
            (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
        }
    }

    #[test]
    fn grid_layout() {
        let g = make_grid(1, 8, 2.0 * PI).unwrap();
        assert!((g.spacing() - PI / 4.0).abs() < 1e-15);
        assert!((g.coordinate(0) + PI).abs() < 1e-15);
        assert!((g.coordinate(1) + 3.0 * PI / 4.0).abs() < 1e-15);
        let mut k: Vec<f64> = g.wavenumbers().to_vec();
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<f64> = (-4..4).map(|k| k as f64).collect();
        for (a, b) in k.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }

        let g2 = make_grid(2, 16, 40.0).unwrap();
        assert_eq!(g2.len(), 256);
        assert_eq!(g2.spacing(), 2.5);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(1, 12, 1.0).is_err());
        assert!(make_grid(3, 16, 1.0).is_err());
        assert!(make_grid(1, 4, 1.0).is_err());
        assert!(make_grid(1, 16, -1.0).is_err());
    }

    fn cos_field(k: f64) -> Field {
        let g = make_grid(1, 64, 2.0 * PI).unwrap();
        Field::from_fn(g, |[x, _]| (k * x).cos()).unwrap()
    }

    #[test]
    fn frac_lap_examples() {
        let u = cos_field(1.0);
        let out = apply_multiplier(&u, &MultiplierSpec::FracLap { s: 0.4 }).unwrap();
        for (a, b) in out.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let u2 = cos_field(2.0);
        let out = apply_multiplier(&u2, &MultiplierSpec::FracLap { s: 0.5 }).unwrap();
        for (a, b) in out.values().iter().zip(u2.values()) {
            assert!((a - 2.0 * b).abs() < 1e-13);
        }
        let c = Field::from_fn(u.grid().clone(), |_| 7.0).unwrap();
        let out = apply_multiplier(&c, &MultiplierSpec::FracLap { s: 0.3 }).unwrap();
        assert!(out.max_abs() < 1e-13);
    }

    #[test]
    fn helmholtz_inverse_of_cos2x() {
        let u = cos_field(2.0);
        let inv = apply_multiplier(&u, &MultiplierSpec::HelmholtzInverse { s: 0.5, c: 1.0 }).unwrap();
        for (a, b) in inv.values().iter().zip(u.values()) {
            assert!((a - b / 3.0).abs() < 1e-14);
        }
        // recovering u: frac_lap(inv) + c·inv
        let back = apply_multiplier(&inv, &MultiplierSpec::FracLap { s: 0.5 }).unwrap();
        let back = back.axpy(1.0, &inv).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn seminorm_and_norm_examples() {
        let u = cos_field(1.0);
        for s in [0.1, 0.4, 0.9] {
            assert!(close(seminorm_sq(&u, s).unwrap(), PI, 1e-13));
        }
        let u2 = cos_field(2.0);
        assert!(close(seminorm_sq(&u2, 0.5).unwrap(), 2.0 * PI, 1e-13));
        let c = Field::from_fn(u.grid().clone(), |_| 3.0).unwrap();
        assert!(seminorm_sq(&c, 0.5).unwrap().abs() < 1e-20);

        let g = make_grid(1, 16, 2.0).unwrap();
        let one = Field::from_fn(g.clone(), |_| 1.0).unwrap();
        assert!(close(norm_lp(&one, 2.0).unwrap(), 2.0_f64.sqrt(), 1e-15));
        assert!(close(norm_lp(&u, 4.0).unwrap(), (0.75 * PI).powf(0.25), 1e-13));
        assert_eq!(norm_lp(&Field::zeros(g), 3.0).unwrap(), 0.0);
        assert!(norm_lp(&u, 0.5).is_err());
    }

    #[test]
    fn spectral_cache_round_trip() {
        let g = make_grid(2, 16, 5.0).unwrap();
        let u = Field::from_fn(g.clone(), |[x, y]| (-(x * x + 2.0 * y * y)).exp() + 0.1 * x).unwrap();
        let back = g.inverse(u.spectrum());
        let err = back
            .iter()
            .zip(u.values())
            .map(|(z, v)| (z.re - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * u.max_abs());
    }

    #[test]
    fn interpolation_reproduces_grid_and_dilates() {
        let g = make_grid(1, 256, 20.0).unwrap();
        let u = Field::from_fn(g.clone(), |[x, _]| (-x * x).exp()).unwrap();
        let same = interpolate_lattice(&u, -10.0, g.spacing(), 256);
        for (a, b) in same.iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = 1.7;
        let shrunk = interpolate_lattice(&u, -10.0 * t, t * g.spacing(), 256);
        for (j, v) in shrunk.iter().enumerate() {
            let x = t * g.coordinate(j);
            let exact = if x.abs() < 10.0 { (-x * x).exp() } else { 0.0 };
            assert!((v - exact).abs() < 1e-10, "{j}: {v} vs {exact}");
        }

        let g2 = make_grid(2, 64, 12.0).unwrap();
        let u2 = Field::from_fn(g2.clone(), |[x, y]| (-(x * x + 0.5 * y * y)).exp()).unwrap();
        let t = 0.6;
        let out = interpolate_lattice(&u2, -6.0 * t, t * g2.spacing(), 64);
        for (idx, v) in out.iter().enumerate() {
            let [x, y] = g2.point(idx);
            let exact = (-(t * t) * (x * x + 0.5 * y * y)).exp();
            assert!((v - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetrize_is_projection() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let u = Field::from_fn(g, |[x, y]| (x + 0.3 * y * y).sin() + x * y * y).unwrap();
        let s = symmetrize(&u);
        let ss = symmetrize(&s);
        for (a, b) in s.values().iter().zip(ss.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_fraction() {
        let g = make_grid(1, 128, 10.0).unwrap();
        let flat = Field::from_fn(g.clone(), |_| 1.0).unwrap();
        assert!((boundary_mass_fraction(&flat) - 0.2).abs() < 0.02);
        let bump = Field::from_fn(g, |[x, _]| (-x * x).exp()).unwrap();
        assert!(boundary_mass_fraction(&bump) < 1e-12);
    }
}
