//! Uniform periodic grids and the fields sampled on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n^d` points on `[-L, L)^d`, row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 16, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Angular wavenumber `π m / L` of FFT bin `i`, with `m` in `[-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let m = if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        };
        std::f64::consts::PI * m as f64 / self.half_width
    }

    /// Per-axis indices of a flat index.
    pub fn unravel(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    /// Coordinates of a flat index; unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unravel(flat);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.coord(idx[a]);
        }
        x
    }

    pub fn radius_sq(&self, flat: usize) -> f64 {
        self.point(flat).iter().map(|v| v * v).sum()
    }

    /// `|k|²` at every flat index.
    pub fn wavenumber_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|flat| {
                let idx = self.unravel(flat);
                (0..self.dim).map(|a| self.wavenumber(idx[a]).powi(2)).sum()
            })
            .collect()
    }

    /// Same points scaled by `1/factor` (the `y = x/τ` grid).
    pub fn scaled(&self, factor: f64) -> Grid {
        Grid {
            half_width: self.half_width / factor,
            ..*self
        }
    }

    /// True for points in the outer `fraction` of the box along any axis.
    pub fn in_shell(&self, flat: usize, fraction: f64) -> bool {
        let edge = self.half_width * (1.0 - fraction);
        self.point(flat)[..self.dim].iter().any(|x| x.abs() >= edge)
    }
}

/// Complex field on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub t: f64,
}

impl WaveField {
    pub fn new(grid: Grid, values: Vec<Complex64>, t: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, t })
    }

    pub fn zeros(grid: Grid, t: f64) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            t,
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|flat| {
                let x = grid.point(flat);
                f(&x[..grid.dim])
            })
            .collect();
        Self { grid, values, t }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `‖self − other‖_{L²}` on a common grid.
    pub fn distance(&self, other: &WaveField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("fields live on different grids".into()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn density(&self) -> DensityProfile {
        DensityProfile::new_unchecked(self.grid, self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    /// Mass in the outer `fraction` of the box.
    pub fn shell_mass(&self, fraction: f64) -> f64 {
        let w = self.grid.cell_volume();
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_shell(*i, fraction))
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * w
    }
}

/// Nonnegative density on a grid, with its quadrature mass cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub grid: Grid,
    values: Vec<f64>,
    mass: f64,
}

impl DensityProfile {
    /// Values below `-1e-12` are rejected; smaller negative round-off is kept.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "density has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return Err(Error::Precondition(format!(
                "density values must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self::new_unchecked(grid, values))
    }

    pub(crate) fn new_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        let mass = grid.cell_volume() * values.iter().sum::<f64>();
        Self { grid, values, mass }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|flat| {
                let x = grid.point(flat);
                f(&x[..grid.dim])
            })
            .collect();
        Self::new(grid, values)
    }

    /// `γ² = e^{-|y|²}`.
    pub fn gamma_sq(grid: Grid) -> Self {
        Self::new_unchecked(
            grid,
            (0..grid.len()).map(|i| (-grid.radius_sq(i)).exp()).collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// `∫ |self − other|` on a common grid.
    pub fn l1_distance(&self, other: &DensityProfile) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("densities live on different grids".into()));
        }
        Ok(self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Copy rescaled to the given mass.
    pub fn with_mass(&self, mass: f64) -> Self {
        let c = mass / self.mass;
        Self::new_unchecked(self.grid, self.values.iter().map(|v| v * c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0, 64, 1.0).is_err());
        assert!(Grid::new(4, 64, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0).is_err());
        assert!(Grid::new(1, 48, 1.0).is_err());
        assert!(Grid::new(1, 64, 0.0).is_err());
        let g = Grid::new(2, 16, 2.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.cell_volume(), 0.0625);
    }

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = Grid::new(1, 16, std::f64::consts::PI).unwrap();
        let k: Vec<f64> = (0..16).map(|i| g.wavenumber(i)).collect();
        assert_eq!(k[0], 0.0);
        assert!((k[1] - 1.0).abs() < 1e-15);
        assert!((k[7] - 7.0).abs() < 1e-14);
        assert!((k[8] + 8.0).abs() < 1e-14);
        assert!((k[15] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn unravel_row_major() {
        let g = Grid::new(3, 16, 1.0).unwrap();
        assert_eq!(g.unravel(0), [0, 0, 0]);
        assert_eq!(g.unravel(1), [0, 0, 1]);
        assert_eq!(g.unravel(16), [0, 1, 0]);
        assert_eq!(g.unravel(16 * 16 * 3 + 16 * 2 + 5), [3, 2, 5]);
    }

    #[test]
    fn gaussian_mass_by_quadrature() {
        let g = Grid::new(1, 512, 12.0).unwrap();
        let rho = DensityProfile::gamma_sq(g);
        assert!((rho.mass() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let g2 = Grid::new(2, 128, 8.0).unwrap();
        assert!((DensityProfile::gamma_sq(g2).mass() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let mut v = vec![1.0; 16];
        v[3] = -1e-6;
        assert!(matches!(DensityProfile::new(g, v), Err(Error::Precondition(_))));
    }
}
