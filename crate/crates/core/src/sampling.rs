//! Seeded random localized fields used by estimators and tests.

use std::sync::Arc;

use rand::Rng;

use crate::spectral::{Field, Grid};

/// Sums of one to `max_bumps` Gaussian bumps with random centers, widths and amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedSampler {
    pub max_bumps: usize,
    /// Range of the Gaussian standard deviation.
    pub width: (f64, f64),
    /// Centers are drawn per axis from `[-spread, spread]`.
    pub spread: f64,
    pub amplitude: (f64, f64),
}

impl LocalizedSampler {
    /// Widths between 3% and 7% of the box, centered within 10% of the origin.
    pub fn for_grid(grid: &Grid) -> Self {
        let l = grid.box_length();
        LocalizedSampler {
            max_bumps: 3,
            width: (0.03 * l, 0.07 * l),
            spread: 0.08 * l,
            amplitude: (0.5, 1.5),
        }
    }

    pub fn with_width(mut self, lo: f64, hi: f64) -> Self {
        self.width = (lo, hi);
        self
    }

    pub fn with_spread(mut self, spread: f64) -> Self {
        self.spread = spread;
        self
    }

    pub fn with_amplitude(mut self, lo: f64, hi: f64) -> Self {
        self.amplitude = (lo, hi);
        self
    }

    pub fn sample<R: Rng>(&self, grid: &Arc<Grid>, rng: &mut R) -> Field {
        let bumps = rng.gen_range(1..=self.max_bumps.max(1));
        let params: Vec<([f64; 2], f64, f64)> = (0..bumps)
            .map(|_| {
                let mut c = [0.0; 2];
                for ci in c.iter_mut().take(grid.dim()) {
                    *ci = rng.gen_range(-self.spread..=self.spread);
                }
                let w = rng.gen_range(self.width.0..=self.width.1);
                let a = rng.gen_range(self.amplitude.0..=self.amplitude.1);
                (c, w, a)
            })
            .collect();
        let values = grid.sample(|[x, y]| {
            params
                .iter()
                .map(|&([cx, cy], w, a)| {
                    let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                    a * (-0.5 * r2 / (w * w)).exp()
                })
                .sum()
        });
        Field::from_parts(grid.clone(), values)
    }
}
