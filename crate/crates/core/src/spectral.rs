//! Axis-by-axis FFTs on `n^d` row-major arrays and the spectral derivatives
//! built on them.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::field::Grid;

pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    line: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            grid,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            line: vec![Complex64::default(); grid.n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Unnormalized forward DFT over all axes.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Inverse DFT over all axes, normalized so `inverse(forward(x)) = x`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Inverse DFT over all axes without the `1/N` factor.
    pub fn inverse_unnormalized(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], forward: bool) {
        debug_assert_eq!(data.len(), self.grid.len());
        let n = self.grid.n;
        let d = self.grid.dim;
        let fft = if forward { &self.fwd } else { &self.inv };
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for j in 0..n {
                        self.line[j] = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut self.line, &mut self.scratch);
                    for j in 0..n {
                        data[base + j * stride] = self.line[j];
                    }
                }
            }
        }
    }

    /// Wavenumber along `axis` at a flat index; the Nyquist bin is zeroed for
    /// odd-order derivatives.
    fn derivative_wavenumber(&self, flat: usize, axis: usize) -> f64 {
        let idx = self.grid.unravel(flat)[axis];
        if idx == self.grid.n / 2 {
            0.0
        } else {
            self.grid.wavenumber(idx)
        }
    }

    /// `∂_axis u`.
    pub fn gradient(&mut self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (flat, z) in buf.iter_mut().enumerate() {
            let k = self.derivative_wavenumber(flat, axis);
            *z *= Complex64::new(0.0, k);
        }
        self.inverse(&mut buf);
        buf
    }

    /// `∂_axis f` for a real array.
    pub fn derivative_real(&mut self, values: &[f64], axis: usize) -> Vec<f64> {
        let z: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.gradient(&z, axis).into_iter().map(|z| z.re).collect()
    }

    /// `Δf` for a real array.
    pub fn laplacian_real(&mut self, values: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        let k2 = self.grid.wavenumber_sq();
        for (z, k) in buf.iter_mut().zip(&k2) {
            *z *= -k;
        }
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `Σ_k |k|^{2s} |û_k|² h^d / N`, the grid version of `‖u‖²_{Ḣ^s}`.
    pub fn homogeneous_sobolev_sq(&mut self, values: &[Complex64], s: f64) -> f64 {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        let k2 = self.grid.wavenumber_sq();
        let weight = self.grid.cell_volume() / buf.len() as f64;
        buf.iter()
            .zip(&k2)
            .filter(|(_, &k)| k > 0.0)
            .map(|(z, &k)| k.powf(s) * z.norm_sqr())
            .sum::<f64>()
            * weight
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_in_three_dimensions() {
        let grid = Grid::new(3, 16, 3.0).unwrap();
        let data: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut sp = Spectral::new(grid);
        let mut buf = data.clone();
        sp.forward(&mut buf);
        sp.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_gaussian_along_each_axis() {
        let grid = Grid::new(2, 64, 10.0).unwrap();
        let u: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new((-0.5 * grid.radius_sq(i)).exp(), 0.0))
            .collect();
        let mut sp = Spectral::new(grid);
        for axis in 0..2 {
            let g = sp.gradient(&u, axis);
            for i in 0..grid.len() {
                let x = grid.point(i)[axis];
                let exact = -x * (-0.5 * grid.radius_sq(i)).exp();
                assert!((g[i].re - exact).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sobolev_one_matches_gradient_norm() {
        let grid = Grid::new(1, 512, 12.0).unwrap();
        let u: Vec<Complex64> = (0..grid.len())
            .map(|i| Complex64::new((-0.5 * grid.radius_sq(i)).exp(), 0.0))
            .collect();
        let mut sp = Spectral::new(grid);
        let h1 = sp.homogeneous_sobolev_sq(&u, 1.0);
        assert!((h1 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }
}
