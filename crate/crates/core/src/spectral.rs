//! Multi-dimensional periodic FFT over a [`TorusModel`] grid.
//!
//! Transforms run axis by axis on the active (non-collapsed) axes. Working
//! buffers and plans are owned by the value, so one `Spectral` per call site
//! keeps everything reentrant.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::TorusModel;

pub(crate) struct Spectral {
    torus: TorusModel,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `ζ_j(m) = m̃(x_j) + i m̃(y_j)` per complex coordinate and mode, with the
    /// Nyquist wavenumber mapped to zero so odd derivatives stay real.
    zeta: Vec<Vec<Complex64>>,
}

impl Spectral {
    pub fn new(torus: &TorusModel) -> Self {
        let mut planner = FftPlanner::new();
        let g = torus.grid_size();
        let forward = planner.plan_fft_forward(g);
        let inverse = planner.plan_fft_inverse(g);
        let n = torus.n();
        let len = torus.len();
        let shape = torus.shape();
        let mut zeta = vec![vec![Complex64::new(0.0, 0.0); len]; n];
        for idx in 0..len {
            let mi = torus.multi_index(idx);
            let wn: Vec<f64> = mi.iter().zip(shape.iter()).map(|(&i, &s)| wavenumber(i, s)).collect();
            for j in 0..n {
                zeta[j][idx] = Complex64::new(wn[j], wn[n + j]);
            }
        }
        Self { torus: torus.clone(), forward, inverse, zeta }
    }

    pub fn torus(&self) -> &TorusModel {
        &self.torus
    }

    #[cfg(test)]
    pub fn zeta(&self, j: usize) -> &[Complex64] {
        &self.zeta[j]
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform, normalized so that `inverse(forward(u)) = u`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Symbol of `∂/∂z_j` at mode `idx`: `πi · conj(ζ_j)`.
    pub fn d_symbol(&self, j: usize, idx: usize) -> Complex64 {
        Complex64::new(0.0, PI) * self.zeta[j][idx].conj()
    }

    /// Symbol of `∂/∂z̄_k` at mode `idx`: `πi · ζ_k`.
    pub fn dbar_symbol(&self, k: usize, idx: usize) -> Complex64 {
        Complex64::new(0.0, PI) * self.zeta[k][idx]
    }

    /// Modes on which every first derivative vanishes (the mean and pure
    /// Nyquist combinations).
    pub fn is_null_mode(&self, idx: usize) -> bool {
        self.zeta.iter().all(|z| z[idx].norm_sqr() == 0.0)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let shape = self.torus.shape();
        let strides = self.torus.strides();
        let len = data.len();
        let g = self.torus.grid_size();
        let mut line = vec![Complex64::new(0.0, 0.0); g];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..shape.len() {
            if shape[axis] == 1 {
                continue;
            }
            let stride = strides[axis];
            for base in 0..len {
                if !(base / stride).is_multiple_of(g) {
                    continue;
                }
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

fn wavenumber(i: usize, len: usize) -> f64 {
    if len == 1 || 2 * i == len {
        0.0
    } else if 2 * i < len {
        i as f64
    } else {
        i as f64 - len as f64
    }
}
