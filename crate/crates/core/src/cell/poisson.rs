//! Spectral inverse of the periodic 5-point Laplacian on the unit torus.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) struct PeriodicPoisson {
    n: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Symbol of the 1-d second difference per wavenumber.
    symbol: Vec<f64>,
}

impl PeriodicPoisson {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let h = 1.0 / n as f64;
        let symbol = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                -4.0 * s * s / (h * h)
            })
            .collect();
        Self { n, dim, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), symbol }
    }

    fn transform_columns(&self, data: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut column = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[i + n * j];
            }
            fft.process(&mut column);
            for j in 0..n {
                data[i + n * j] = column[j];
            }
        }
    }

    /// Returns the zero-mean `v` with `Lap_h v = g - mean(g)`.
    pub fn solve(&self, g: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut data: Vec<Complex<f64>> = g.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut data);
        if self.dim == 2 {
            self.transform_columns(&mut data, &self.forward);
        }
        for (idx, z) in data.iter_mut().enumerate() {
            let (k1, k2) = (idx % n, idx / n);
            let eig = self.symbol[k1] + if self.dim == 2 { self.symbol[k2] } else { 0.0 };
            *z = if idx == 0 { Complex::new(0.0, 0.0) } else { *z / eig };
        }
        self.inverse.process(&mut data);
        if self.dim == 2 {
            self.transform_columns(&mut data, &self.inverse);
        }
        let scale = 1.0 / data.len() as f64;
        data.iter().map(|z| z.re * scale).collect()
    }
}
