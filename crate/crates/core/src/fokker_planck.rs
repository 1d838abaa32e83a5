//! Hydrodynamic observables of the rescaled profile and the Fokker–Planck
//! operator `L = Δ + ∇·(2y ·)` whose kernel is spanned by `γ²`.
//!
//! [`fp_solve`] evolves `∂ₛρ = Lρ` exactly: `ρ(s)` is the law of
//! `e^{−2s}Y₀ + G` with `G` centered Gaussian of variance `(1 − e^{−4s})/2` per
//! axis. In Fourier variables this reads
//!
//! ```text
//! ρ̂(s, ξ) = ρ̂₀(e^{−2s} ξ) · exp(−(1 − e^{−4s}) |ξ|²/4),
//! ```
//!
//! evaluated with a direct transform at the scaled frequencies and inverted by
//! FFT.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{s_of_t, TauTrajectory};
use crate::error::{Error, Result};
use crate::field::{DensityProfile, Grid, WaveField};
use crate::rescale::{gamma_mass, moments, relative_entropy, to_v, wasserstein2_1d};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    pub rho: DensityProfile,
    /// `J = Im(v̄ ∇v)`, one array per axis.
    pub current: Vec<Vec<f64>>,
    pub t: f64,
    pub s: Option<f64>,
}

/// `ρ = |v|²` and `J = Im(v̄ ∇v)`.
pub fn hydro_fields(v: &WaveField) -> HydroFields {
    let mut sp = Spectral::new(v.grid);
    let current = (0..v.grid.dim)
        .map(|a| {
            let g = sp.gradient(&v.values, a);
            v.values
                .iter()
                .zip(&g)
                .map(|(z, dz)| (z.conj() * dz).im)
                .collect()
        })
        .collect();
    HydroFields {
        rho: v.density(),
        current,
        t: v.t,
        s: None,
    }
}

/// Smooth test function with its gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestFunction {
    /// `e^{−|y|²/2}`
    Gauss,
    /// `y₁ e^{−|y|²/2}`
    FirstMomentGauss,
    /// `|y|² e^{−|y|²/2}`
    SecondMomentGauss,
    /// `∏ ½(tanh((yₐ+1)/w) − tanh((yₐ−1)/w))`, `w = 0.1`
    SmoothBoxCentered,
    /// `∏ ½(tanh(yₐ/w) − tanh((yₐ−2)/w))`, `w = 0.1`
    SmoothBoxShifted,
}

pub const DICTIONARY_VERSION: u32 = 1;

pub const DICTIONARY: [TestFunction; 5] = [
    TestFunction::Gauss,
    TestFunction::FirstMomentGauss,
    TestFunction::SecondMomentGauss,
    TestFunction::SmoothBoxCentered,
    TestFunction::SmoothBoxShifted,
];

const BOX_WIDTH: f64 = 0.1;

fn smooth_box(y: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = ((y - lo) / BOX_WIDTH).tanh();
    let b = ((y - hi) / BOX_WIDTH).tanh();
    (0.5 * (a - b), 0.5 * ((1.0 - a * a) - (1.0 - b * b)) / BOX_WIDTH)
}

impl TestFunction {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Gauss => "gauss",
            TestFunction::FirstMomentGauss => "y1_gauss",
            TestFunction::SecondMomentGauss => "r2_gauss",
            TestFunction::SmoothBoxCentered => "box_-1_1",
            TestFunction::SmoothBoxShifted => "box_0_2",
        }
    }

    /// Value and gradient at `y`.
    pub fn eval(&self, y: &[f64]) -> (f64, [f64; 3]) {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let g = (-0.5 * r2).exp();
        let mut grad = [0.0; 3];
        match self {
            TestFunction::Gauss => {
                for (a, v) in y.iter().enumerate() {
                    grad[a] = -v * g;
                }
                (g, grad)
            }
            TestFunction::FirstMomentGauss => {
                for (a, v) in y.iter().enumerate() {
                    grad[a] = -y[0] * v * g;
                }
                grad[0] += g;
                (y[0] * g, grad)
            }
            TestFunction::SecondMomentGauss => {
                for (a, v) in y.iter().enumerate() {
                    grad[a] = (2.0 - r2) * v * g;
                }
                (r2 * g, grad)
            }
            TestFunction::SmoothBoxCentered | TestFunction::SmoothBoxShifted => {
                let (lo, hi) = if *self == TestFunction::SmoothBoxCentered {
                    (-1.0, 1.0)
                } else {
                    (0.0, 2.0)
                };
                let parts: Vec<(f64, f64)> = y.iter().map(|&v| smooth_box(v, lo, hi)).collect();
                let value: f64 = parts.iter().map(|p| p.0).product();
                for a in 0..y.len() {
                    grad[a] = parts
                        .iter()
                        .enumerate()
                        .map(|(b, p)| if a == b { p.1 } else { p.0 })
                        .product();
                }
                (value, grad)
            }
        }
    }
}

/// `∫ ρ φ`.
pub fn pair(rho: &DensityProfile, phi: TestFunction) -> f64 {
    let g = rho.grid;
    rho.values()
        .iter()
        .enumerate()
        .map(|(flat, r)| r * phi.eval(&g.point(flat)[..g.dim]).0)
        .sum::<f64>()
        * g.cell_volume()
}

/// `∫ ∇φ · J`.
fn pair_current(h: &HydroFields, phi: TestFunction) -> f64 {
    let g = h.rho.grid;
    (0..g.len())
        .map(|flat| {
            let (_, grad) = phi.eval(&g.point(flat)[..g.dim]);
            (0..g.dim).map(|a| grad[a] * h.current[a][flat]).sum::<f64>()
        })
        .sum::<f64>()
        * g.cell_volume()
}

/// Weak-form residuals of `∂ₜρ + τ^{−2} ∇·J = 0`,
///
/// ```text
/// d/dt ∫ φρ − τ^{−2} ∫ ∇φ · J,
/// ```
///
/// with centered differences on uniformly spaced snapshots. Each snapshot is
/// integrated on its own `y`-grid, so no interpolation is involved. Returns
/// one row per interior snapshot and one column per test function.
pub fn continuity_residuals(
    fields: &[HydroFields],
    tau: &[f64],
    phis: &[TestFunction],
) -> Result<Vec<Vec<f64>>> {
    let n = fields.len();
    if n < 3 || tau.len() != n {
        return Err(Error::InvalidParameter(
            "need at least three snapshots and one tau per snapshot".into(),
        ));
    }
    let dt = (fields[n - 1].t - fields[0].t) / (n - 1) as f64;
    if fields
        .windows(2)
        .any(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.abs().max(1.0))
    {
        return Err(Error::InvalidParameter("snapshots must be uniformly spaced".into()));
    }
    Ok((1..n - 1)
        .map(|k| {
            phis.iter()
                .map(|&phi| {
                    let d = (pair(&fields[k + 1].rho, phi) - pair(&fields[k - 1].rho, phi)) / (2.0 * dt);
                    d - pair_current(&fields[k], phi) / (tau[k] * tau[k])
                })
                .collect()
        })
        .collect())
}

/// `Lρ = Δρ + 2dρ + 2y·∇ρ` by spectral differentiation.
pub fn apply_l(rho: &DensityProfile) -> Vec<f64> {
    let g = rho.grid;
    let mut sp = Spectral::new(g);
    let mut out = sp.laplacian_real(rho.values());
    let d = g.dim as f64;
    for (o, r) in out.iter_mut().zip(rho.values()) {
        *o += 2.0 * d * r;
    }
    for a in 0..g.dim {
        let da = sp.derivative_real(rho.values(), a);
        for (flat, o) in out.iter_mut().enumerate() {
            *o += 2.0 * g.point(flat)[a] * da[flat];
        }
    }
    out
}

/// `Σ_i ρ_i e^{−iη yᵢ}` for each `η` of the scaled grid frequencies, one axis.
fn scaled_dft_matrix(grid: &Grid, scale: f64) -> Vec<Complex64> {
    let n = grid.n;
    let mut m = vec![Complex64::default(); n * n];
    for k in 0..n {
        let eta = scale * grid.wavenumber(k);
        for i in 0..n {
            m[k * n + i] = Complex64::from_polar(1.0, -eta * grid.coord(i));
        }
    }
    m
}

/// Exact Fokker–Planck evolution of `rho0` over logarithmic time `s_end`.
pub fn fp_solve(rho0: &DensityProfile, s_end: f64) -> Result<DensityProfile> {
    if !(s_end >= 0.0) || !s_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "s_end must be nonnegative, got {s_end}"
        )));
    }
    if let Some(v) = rho0.values().iter().find(|v| !v.is_finite() || **v < -1e-12) {
        return Err(Error::Precondition(format!(
            "density values must be finite and nonnegative, found {v}"
        )));
    }
    if s_end == 0.0 {
        return Ok(rho0.clone());
    }
    let g = rho0.grid;
    let n = g.n;
    let shrink = (-2.0 * s_end).exp();
    let spread = 0.25 * (1.0 - (-4.0 * s_end).exp());

    // ρ̂₀ at e^{−2s}ξ: apply the scaled DFT along each axis in turn
    let mat = scaled_dft_matrix(&g, shrink);
    let mut data: Vec<Complex64> = rho0.values().iter().map(|&r| Complex64::new(r, 0.0)).collect();
    let mut line = vec![Complex64::default(); n];
    for axis in 0..g.dim {
        let stride = n.pow((g.dim - 1 - axis) as u32);
        let outer = n.pow(axis as u32);
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                for (k, out) in line.iter_mut().enumerate() {
                    let row = &mat[k * n..(k + 1) * n];
                    *out = (0..n).map(|i| row[i] * data[base + i * stride]).sum();
                }
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }

    let k2 = g.wavenumber_sq();
    for (flat, z) in data.iter_mut().enumerate() {
        // e^{iξ·(−L)} shifts the transform origin to the first grid point
        let idx = g.unravel(flat);
        let parity: usize = (0..g.dim).map(|a| idx[a]).sum();
        let sign = if parity.is_multiple_of(2) { 1.0 } else { -1.0 };
        *z *= sign * (-spread * k2[flat]).exp();
    }
    Spectral::new(g).inverse(&mut data);

    let values: Vec<f64> = data.iter().map(|z| z.re.max(0.0)).collect();
    let out = DensityProfile::new_unchecked(g, values);
    Ok(out.with_mass(rho0.mass()))
}

/// `γ² · mass/π^{d/2}`, the stationary state with the mass of `rho`.
pub fn stationary_state(rho: &DensityProfile) -> DensityProfile {
    DensityProfile::gamma_sq(rho.grid).with_mass(rho.mass())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentGaps {
    /// `|∫ y ρ̃|`
    pub m1: f64,
    /// `|∫ |y|² ρ̃ − (d/2) π^{d/2}|`
    pub m2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpRow {
    pub s: f64,
    pub t: f64,
    pub moment_gaps: MomentGaps,
    pub entropy: f64,
    pub w2: Option<f64>,
    /// `|⟨ρ̃(s) − γ², φ⟩|` for each dictionary entry.
    pub proxies: Vec<f64>,
    /// The same proxies for the Fokker–Planck evolution of the first row,
    /// when that row's grid is small enough for the direct transform.
    pub reference_proxies: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub name: String,
    pub first: f64,
    pub last: f64,
    pub monotone_nonincreasing: bool,
    /// Least-squares slope of `ln(value)` against `s`, when all values are
    /// positive.
    pub log_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpReport {
    pub schema_version: u32,
    pub dictionary_version: u32,
    pub dictionary: Vec<String>,
    pub rows: Vec<FpRow>,
    pub trends: Vec<Trend>,
}

pub const FP_REPORT_SCHEMA_VERSION: u32 = 1;

/// Largest grid (points) on which [`fp_compare`] runs the reference evolution.
pub const REFERENCE_MAX_POINTS: usize = 4096;

fn proxies(rho: &DensityProfile, gamma: &DensityProfile) -> Vec<f64> {
    DICTIONARY
        .iter()
        .map(|&phi| (pair(rho, phi) - pair(gamma, phi)).abs())
        .collect()
}

fn trend(name: &str, s: &[f64], values: &[f64]) -> Trend {
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    let log_slope = if values.len() >= 2 && values.iter().all(|v| *v > 0.0) {
        let n = values.len() as f64;
        let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let ms = s.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = s.iter().map(|x| (x - ms).powi(2)).sum();
        let sxy: f64 = s.iter().zip(&ys).map(|(x, y)| (x - ms) * (y - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    Trend {
        name: name.to_string(),
        first: values.first().copied().unwrap_or(f64::NAN),
        last: values.last().copied().unwrap_or(f64::NAN),
        monotone_nonincreasing: monotone,
        log_slope,
    }
}

/// Profiles `ρ̃(s) = |v|²` of the given `u`-snapshots compared with `γ²`.
/// The snapshots must span at least `min_s_range` in `s`.
pub fn fp_compare(
    snapshots: &[WaveField],
    traj: &TauTrajectory,
    u0_norm: f64,
    min_s_range: f64,
) -> Result<FpReport> {
    let mut rows = Vec::new();
    let mut reference: Option<(f64, DensityProfile)> = None;
    for u in snapshots.iter().filter(|u| u.t > 0.0) {
        let s = s_of_t(traj, u.t)?;
        let v = to_v(u, traj, u0_norm)?;
        let d = v.grid.dim;
        let rho = v.density().with_mass(gamma_mass(d));
        let gamma = DensityProfile::gamma_sq(v.grid);
        let m = moments(&rho);
        let m1 = m.m1.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m2 = (m.m2 - 0.5 * d as f64 * gamma_mass(d)).abs();
        let w2 = if d == 1 {
            Some(wasserstein2_1d(&rho, &gamma.with_mass(rho.mass()))?)
        } else {
            None
        };
        if reference.is_none() && rho.grid.len() <= REFERENCE_MAX_POINTS {
            reference = Some((s, rho.clone()));
        }
        let reference_proxies = match &reference {
            Some((s0, r0)) => {
                let evolved = fp_solve(r0, s - s0)?;
                Some(proxies(&evolved, &DensityProfile::gamma_sq(r0.grid)))
            }
            None => None,
        };
        rows.push(FpRow {
            s,
            t: u.t,
            moment_gaps: MomentGaps { m1, m2 },
            entropy: relative_entropy(&rho)?,
            w2,
            proxies: proxies(&rho, &gamma),
            reference_proxies,
        });
    }
    rows.sort_by(|a, b| a.s.total_cmp(&b.s));
    let range = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b.s - a.s,
        _ => 0.0,
    };
    if rows.len() < 2 || range < min_s_range {
        return Err(Error::Precondition(format!(
            "snapshots span {range:.3} in s, need at least {min_s_range}"
        )));
    }

    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let mut trends = vec![
        trend("m1_gap", &s, &rows.iter().map(|r| r.moment_gaps.m1).collect::<Vec<_>>()),
        trend("m2_gap", &s, &rows.iter().map(|r| r.moment_gaps.m2).collect::<Vec<_>>()),
        trend("entropy", &s, &rows.iter().map(|r| r.entropy).collect::<Vec<_>>()),
    ];
    if rows.iter().all(|r| r.w2.is_some()) {
        trends.push(trend("w2", &s, &rows.iter().map(|r| r.w2.unwrap()).collect::<Vec<_>>()));
    }
    for (i, phi) in DICTIONARY.iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|r| r.proxies[i]).collect();
        trends.push(trend(phi.name(), &s, &vals));
    }

    Ok(FpReport {
        schema_version: FP_REPORT_SCHEMA_VERSION,
        dictionary_version: DICTIONARY_VERSION,
        dictionary: DICTIONARY.iter().map(|p| p.name().to_string()).collect(),
        rows,
        trends,
    })
}

/// `‖ρ‖_{L¹}` distance to the stationary state of the same mass.
pub fn l1_to_stationary(rho: &DensityProfile) -> f64 {
    rho.l1_distance(&stationary_state(rho))
        .expect("same grid by construction")
}
