//! Benchmark fixtures.

use lognls_core::{DensityProfile, GaussianInit, Grid, ModelParams, WaveField};
use num_complex::Complex64;

pub fn grid(dim: usize, n: usize, half_width: f64) -> Grid {
    Grid::new(dim, n, half_width).expect("benchmark grids are valid")
}

/// Isotropic unit Gaussian with a small phase chirp.
pub fn gaussian(grid: Grid) -> WaveField {
    GaussianInit::isotropic(grid.dim, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.3))
        .and_then(|g| g.field(grid))
        .expect("grid contains the datum")
}

/// `λ = 1` with a cubic perturbation.
pub fn perturbed() -> ModelParams {
    ModelParams::logarithmic(1.0).with_power(1.0, 1.0)
}

/// Off-centre, two-bump density with the mass of `γ²`.
pub fn skewed_density(grid: Grid) -> DensityProfile {
    let rho = DensityProfile::from_fn(grid, |y| {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        (-(r2 - 2.0 * y[0] + 1.0)).exp() + 0.5 * (-2.0 * (r2 + 2.0 * y[0] + 1.0)).exp()
    })
    .expect("density is nonnegative");
    rho.with_mass(DensityProfile::gamma_sq(grid).mass())
}
