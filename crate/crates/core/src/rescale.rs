//! The rescaled profile `v` and the functionals evaluated on it.
//!
//! With `τ` the universal dispersion,
//!
//! ```text
//! v(t, y) = τ^{d/2} (‖γ‖/‖u₀‖) u(t, τy) exp(−i τ̇ τ |y|²/2),   γ(y) = e^{−|y|²/2}.
//! ```
//!
//! The `y`-grid is the `x`-grid divided by `τ`, so the transform is pointwise.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::{s_of_t, TauTrajectory};
use crate::error::{Error, Result};
use crate::field::{DensityProfile, Grid, WaveField};
use crate::pde::{conserved_record, ModelParams};
use crate::spectral::Spectral;

/// Time-stamped scalar diagnostics. Fields that were not computed are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub s: Option<f64>,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub energy: f64,
    pub energy_reg: f64,
    pub e_kin: Option<f64>,
    pub e_ent: Option<f64>,
    pub pseudo_e: Option<f64>,
    pub m0: Option<f64>,
    pub m1: Option<Vec<f64>>,
    pub m2: Option<f64>,
    pub i1: Option<Vec<f64>>,
    pub i2: Option<Vec<f64>>,
    pub w2: Option<f64>,
    /// `∫ (1 + |y|² + |ln|v|²|) |v|² + E_kin`.
    pub a_priori: Option<f64>,
    /// `(s, ‖u‖_{Ḣ^s})` pairs.
    pub sobolev: Vec<(f64, f64)>,
}

/// `‖γ‖²_{L²} = π^{d/2}`.
pub fn gamma_mass(dim: usize) -> f64 {
    PI.powf(0.5 * dim as f64)
}

/// Minimum number of `y`-grid points per unit length.
pub const MIN_POINTS_PER_UNIT_Y: f64 = 8.0;

pub fn to_v(u: &WaveField, traj: &TauTrajectory, u0_norm: f64) -> Result<WaveField> {
    if !(u0_norm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "u0 norm must be positive, got {u0_norm}"
        )));
    }
    let (tau, tau_dot) = traj.eval(u.t)?;
    let ygrid = u.grid.scaled(tau);
    if ygrid.spacing() * MIN_POINTS_PER_UNIT_Y > 1.0 {
        return Err(Error::Resolution(format!(
            "y-spacing {:.3e} at tau = {tau:.3e} gives fewer than {MIN_POINTS_PER_UNIT_Y} points per unit length",
            ygrid.spacing()
        )));
    }
    let d = u.grid.dim as f64;
    let scale = tau.powf(0.5 * d) * gamma_mass(u.grid.dim).sqrt() / u0_norm;
    let chirp = 0.5 * tau_dot / tau;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(flat, z)| z * Complex64::from_polar(scale, -chirp * u.grid.radius_sq(flat)))
        .collect();
    WaveField::new(ygrid, values, u.t)
}

/// Inverse of [`to_v`]: `u` on the `x`-grid, which is the `y`-grid times `τ`.
pub fn from_v(v: &WaveField, traj: &TauTrajectory, u0_norm: f64) -> Result<WaveField> {
    if !(u0_norm > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "u0 norm must be positive, got {u0_norm}"
        )));
    }
    let (tau, tau_dot) = traj.eval(v.t)?;
    let xgrid = v.grid.scaled(1.0 / tau);
    let d = v.grid.dim as f64;
    let scale = u0_norm / (tau.powf(0.5 * d) * gamma_mass(v.grid.dim).sqrt());
    let chirp = 0.5 * tau_dot / tau;
    let values = v
        .values
        .iter()
        .enumerate()
        .map(|(flat, z)| z * Complex64::from_polar(scale, chirp * xgrid.radius_sq(flat)))
        .collect();
    WaveField::new(xgrid, values, v.t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m0: f64,
    pub m1: Vec<f64>,
    pub m2: f64,
}

/// `(∫ρ, ∫yρ, ∫|y|²ρ)`.
pub fn moments(rho: &DensityProfile) -> Moments {
    let g = rho.grid;
    let w = g.cell_volume();
    let mut m1 = vec![0.0; g.dim];
    let mut m2 = 0.0;
    for (flat, &r) in rho.values().iter().enumerate() {
        let y = g.point(flat);
        for a in 0..g.dim {
            m1[a] += y[a] * r;
        }
        m2 += g.radius_sq(flat) * r;
    }
    Moments {
        m0: rho.mass(),
        m1: m1.into_iter().map(|v| v * w).collect(),
        m2: m2 * w,
    }
}

fn check_gamma_mass(rho: &DensityProfile) -> Result<()> {
    let target = gamma_mass(rho.dim());
    let rel = (rho.mass() - target).abs() / target;
    if rel > 1e-6 {
        return Err(Error::Precondition(format!(
            "density mass {} differs from the Gaussian mass {target} by {rel:.3e} (relative)",
            rho.mass()
        )));
    }
    Ok(())
}

/// `∫ ρ ln(ρ/γ²)` with `0 ln 0 = 0`. The mass of `ρ` must be `π^{d/2}`.
pub fn relative_entropy(rho: &DensityProfile) -> Result<f64> {
    check_gamma_mass(rho)?;
    let g = rho.grid;
    let sum: f64 = rho
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r >= 1e-300)
        .map(|(flat, &r)| r * (r.ln() + g.radius_sq(flat)))
        .sum();
    Ok(sum * g.cell_volume())
}

/// `‖ρ − γ²‖²_{L¹} / (2‖γ²‖_{L¹})`, a lower bound for [`relative_entropy`].
pub fn csiszar_kullback_bound(rho: &DensityProfile) -> Result<f64> {
    let l1 = rho.l1_distance(&DensityProfile::gamma_sq(rho.grid))?;
    Ok(l1 * l1 / (2.0 * gamma_mass(rho.dim())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoEnergy {
    pub e_kin: f64,
    pub e_ent: f64,
    /// `μ̃/((σ+1)τ^{dσ}) ∫ |v|^{2σ+2}` with `μ̃ = (‖u₀‖/‖γ‖)^{2σ} μ`.
    pub e_pow: f64,
    pub total: f64,
}

/// `E_kin = ‖∇v‖²/(2τ²)`, `E_ent` and `𝓔 = E_kin + λE_ent (+ E_pow)`.
pub fn pseudo_energy(
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
) -> Result<PseudoEnergy> {
    pseudo_energy_with(v, traj, params, u0_norm, &mut Spectral::new(v.grid))
}

fn pseudo_energy_with(
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
    spectral: &mut Spectral,
) -> Result<PseudoEnergy> {
    let tau = traj.tau(v.t)?;
    let e_kin = spectral.homogeneous_sobolev_sq(&v.values, 1.0) / (2.0 * tau * tau);
    let e_ent = relative_entropy(&v.density())?;
    let mut e_pow = 0.0;
    if params.mu > 0.0 {
        let d = v.grid.dim as f64;
        let sigma = params.sigma;
        let mu_tilde = (u0_norm / gamma_mass(v.grid.dim).sqrt()).powf(2.0 * sigma) * params.mu;
        let integral: f64 = v
            .values
            .iter()
            .map(|z| z.norm_sqr().powf(sigma + 1.0))
            .sum::<f64>()
            * v.grid.cell_volume();
        e_pow = mu_tilde / ((sigma + 1.0) * tau.powf(d * sigma)) * integral;
    }
    Ok(PseudoEnergy {
        e_kin,
        e_ent,
        e_pow,
        total: e_kin + params.lambda * e_ent + e_pow,
    })
}

/// `I₁ = Im ∫ v̄ ∇v` and `I₂ = ∫ y |v|²`.
pub fn momentum_pair(v: &WaveField) -> (Vec<f64>, Vec<f64>) {
    momentum_pair_with(v, &mut Spectral::new(v.grid))
}

fn momentum_pair_with(v: &WaveField, spectral: &mut Spectral) -> (Vec<f64>, Vec<f64>) {
    let i1 = crate::pde::momentum_with(v, spectral);
    let i2 = moments(&v.density()).m1;
    (i1, i2)
}

/// Centered-difference residuals of `İ₁ + 2λI₂` and `İ₂ − I₁/τ²` on uniformly
/// spaced samples; one entry per interior sample and axis 0.
pub fn momentum_pair_residuals(
    times: &[f64],
    i1: &[f64],
    i2: &[f64],
    tau: &[f64],
    lambda: f64,
) -> Result<Vec<(f64, f64)>> {
    let n = times.len();
    if n < 3 || i1.len() != n || i2.len() != n || tau.len() != n {
        return Err(Error::InvalidParameter(
            "need at least three samples of equal length".into(),
        ));
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0))
    {
        return Err(Error::InvalidParameter("samples must be uniformly spaced".into()));
    }
    Ok((1..n - 1)
        .map(|k| {
            let d1 = (i1[k + 1] - i1[k - 1]) / (2.0 * dt);
            let d2 = (i2[k + 1] - i2[k - 1]) / (2.0 * dt);
            (d1 + 2.0 * lambda * i2[k], d2 - i1[k] / (tau[k] * tau[k]))
        })
        .collect())
}

/// Cells of positive mass as `(cumulative probability at the right edge, left
/// edge, right edge)`.
fn quantile_table(rho: &DensityProfile) -> Vec<(f64, f64, f64)> {
    let g = rho.grid;
    let h = g.spacing();
    let total: f64 = rho.values().iter().map(|v| v.max(0.0)).sum();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(g.n);
    for (i, &v) in rho.values().iter().enumerate() {
        if v > 0.0 {
            acc += v / total;
            let x = g.coord(i);
            out.push((acc, x - 0.5 * h, x + 0.5 * h));
        }
    }
    if let Some(last) = out.last_mut() {
        last.0 = 1.0;
    }
    out
}

/// `W₂` between two 1-D densities of equal mass, each read as piecewise
/// constant on its grid cells and normalized to a probability measure.
pub fn wasserstein2_1d(rho1: &DensityProfile, rho2: &DensityProfile) -> Result<f64> {
    for r in [rho1, rho2] {
        if r.dim() != 1 {
            return Err(Error::UnsupportedDimension(r.dim()));
        }
    }
    let (m1, m2) = (rho1.mass(), rho2.mass());
    if !(m1 > 0.0) || ((m1 - m2) / m1).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "densities must have equal positive mass, got {m1} and {m2}"
        )));
    }
    let a = quantile_table(rho1);
    let b = quantile_table(rho2);
    // quantile functions are linear on each cell; integrate the squared
    // difference exactly on the merged partition of [0, 1]
    let (mut i, mut j) = (0, 0);
    let (mut q0, mut qa0, mut qb0) = (0.0, 0.0, 0.0);
    let mut sum = 0.0;
    let quantile = |cell: &(f64, f64, f64), start: f64, q: f64| -> f64 {
        let width = cell.0 - start;
        if width <= 0.0 {
            cell.1
        } else {
            cell.1 + (cell.2 - cell.1) * ((q - start) / width).clamp(0.0, 1.0)
        }
    };
    while i < a.len() && j < b.len() {
        let q1 = a[i].0.min(b[j].0);
        if q1 > q0 {
            let d0 = quantile(&a[i], qa0, q0) - quantile(&b[j], qb0, q0);
            let d1 = quantile(&a[i], qa0, q1) - quantile(&b[j], qb0, q1);
            sum += (q1 - q0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        }
        q0 = q1;
        if a[i].0 <= q1 {
            qa0 = a[i].0;
            i += 1;
        }
        if j < b.len() && b[j].0 <= q1 {
            qb0 = b[j].0;
            j += 1;
        }
    }
    Ok(sum.max(0.0).sqrt())
}

/// `‖u‖_{Ḣ^s}` for `s ∈ (0, 1]`.
pub fn sobolev_norm(u: &WaveField, s: f64) -> Result<f64> {
    sobolev_norm_with(u, s, &mut Spectral::new(u.grid))
}

fn sobolev_norm_with(u: &WaveField, s: f64, spectral: &mut Spectral) -> Result<f64> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
    }
    Ok(spectral.homogeneous_sobolev_sq(&u.values, s).sqrt())
}

/// `∫ (1 + |y|² + |ln|v|²|) |v|² + E_kin`.
pub fn a_priori_bound(v: &WaveField, e_kin: f64) -> f64 {
    let g = v.grid;
    let sum: f64 = v
        .values
        .iter()
        .enumerate()
        .map(|(flat, z)| {
            let r = z.norm_sqr();
            let log = if r >= 1e-300 { r.ln().abs() } else { 0.0 };
            (1.0 + g.radius_sq(flat) + log) * r
        })
        .sum();
    sum * g.cell_volume() + e_kin
}

/// Every diagnostic of `u` and its rescaled profile.
pub fn diagnose(
    u: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
    sobolev_exponents: &[f64],
) -> Result<DiagnosticsRecord> {
    let mut spectral_u = Spectral::new(u.grid);
    let mut rec = conserved_record(u, params, &mut spectral_u);
    for &s in sobolev_exponents {
        rec.sobolev.push((s, sobolev_norm_with(u, s, &mut spectral_u)?));
    }
    let v = to_v(u, traj, u0_norm)?;
    profile_diagnostics(&mut rec, &v, traj, params, u0_norm, &mut Spectral::new(v.grid))?;
    Ok(rec)
}

/// Fills the `v`-side fields of `rec` (s-time, pseudo-energy, moments,
/// momentum pair, W₂ in d=1, a priori bound).
pub(crate) fn profile_diagnostics(
    rec: &mut DiagnosticsRecord,
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
    spectral: &mut Spectral,
) -> Result<()> {
    if v.t > 0.0 {
        rec.s = Some(s_of_t(traj, v.t)?);
    }
    let pe = pseudo_energy_with(v, traj, params, u0_norm, spectral)?;
    let rho = v.density();
    let m = moments(&rho);
    let (i1, i2) = momentum_pair_with(v, spectral);
    if v.grid.dim == 1 {
        let gamma = DensityProfile::gamma_sq(v.grid);
        rec.w2 = Some(wasserstein2_1d(&rho.with_mass(gamma.mass()), &gamma)?);
    }
    rec.e_kin = Some(pe.e_kin);
    rec.e_ent = Some(pe.e_ent);
    rec.pseudo_e = Some(pe.total);
    rec.m0 = Some(m.m0);
    rec.m1 = Some(m.m1);
    rec.m2 = Some(m.m2);
    rec.i1 = Some(i1);
    rec.i2 = Some(i2);
    rec.a_priori = Some(a_priori_bound(v, pe.e_kin));
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn opt_vec(v: &Option<Vec<f64>>, d: usize) -> Vec<String> {
    match v {
        Some(xs) => xs.iter().map(|x| format!("{x:.16e}")).collect(),
        None => vec![String::new(); d],
    }
}

/// Writes records as CSV. Columns, in order:
///
/// `t, s, mass, J_1..J_d, energy, energy_reg, E_kin, E_ent, pseudo_E, m0,
/// m1_1..m1_d, m2, I1_1..I1_d, I2_1..I2_d, W2, a_priori, Hs_<s>...`
///
/// where `d` and the Sobolev exponents are taken from the first record.
/// Missing values are empty cells.
pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticsRecord], mut w: W) -> Result<()> {
    let d = records.first().map_or(1, |r| r.momentum.len().max(1));
    let exps: Vec<f64> = records
        .first()
        .map(|r| r.sobolev.iter().map(|p| p.0).collect())
        .unwrap_or_default();
    let mut header = vec!["t".to_string(), "s".into(), "mass".into()];
    header.extend((1..=d).map(|a| format!("J_{a}")));
    header.extend(["energy", "energy_reg", "E_kin", "E_ent", "pseudo_E", "m0"].map(String::from));
    header.extend((1..=d).map(|a| format!("m1_{a}")));
    header.push("m2".into());
    header.extend((1..=d).map(|a| format!("I1_{a}")));
    header.extend((1..=d).map(|a| format!("I2_{a}")));
    header.extend(["W2", "a_priori"].map(String::from));
    header.extend(exps.iter().map(|s| format!("Hs_{s}")));
    writeln!(w, "{}", header.join(","))?;

    for r in records {
        let mut row = vec![format!("{:.16e}", r.t), opt(r.s), format!("{:.16e}", r.mass)];
        row.extend(opt_vec(&Some(r.momentum.clone()), d));
        row.push(format!("{:.16e}", r.energy));
        row.push(format!("{:.16e}", r.energy_reg));
        row.extend([opt(r.e_kin), opt(r.e_ent), opt(r.pseudo_e), opt(r.m0)]);
        row.extend(opt_vec(&r.m1, d));
        row.push(opt(r.m2));
        row.extend(opt_vec(&r.i1, d));
        row.extend(opt_vec(&r.i2, d));
        row.extend([opt(r.w2), opt(r.a_priori)]);
        for s in &exps {
            row.push(opt(r.sobolev.iter().find(|p| p.0 == *s).map(|p| p.1)));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Samples `γ` (real) on `grid`.
pub fn gamma_field(grid: Grid, t: f64) -> WaveField {
    WaveField::from_fn(grid, t, |y| {
        Complex64::new((-0.5 * y.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::solve_tau;

    fn grid1() -> Grid {
        Grid::new(1, 512, 12.0).unwrap()
    }

    #[test]
    fn moments_of_gamma_sq() {
        let m = moments(&DensityProfile::gamma_sq(grid1()));
        assert!((m.m0 - PI.sqrt()).abs() < 1e-10);
        assert!(m.m1[0].abs() < 1e-10);
        assert!((m.m2 - PI.sqrt() / 2.0).abs() < 1e-10);

        let c = 0.75;
        let shifted =
            DensityProfile::from_fn(grid1(), |y| (-(y[0] - c) * (y[0] - c)).exp()).unwrap();
        assert!((moments(&shifted).m1[0] - c * PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn uniform_box_second_moment() {
        // mass 1 on [−1, 1]; the edge points carry half weight (trapezoid rule)
        let g = Grid::new(1, 2048, 4.0).unwrap();
        let rho = DensityProfile::from_fn(g, |y| match y[0].abs() {
            a if a < 1.0 => 0.5,
            a if a == 1.0 => 0.25,
            _ => 0.0,
        })
        .unwrap();
        let m = moments(&rho);
        assert!((m.m0 - 1.0).abs() < 1e-12);
        assert!((m.m2 - 1.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn entropy_and_ck_bound() {
        let g = grid1();
        assert!(relative_entropy(&DensityProfile::gamma_sq(g)).unwrap().abs() < 1e-10);

        let c = 1.1;
        let rho = DensityProfile::from_fn(g, |y| (-(y[0] / c).powi(2)).exp() / c)
            .unwrap()
            .with_mass(PI.sqrt());
        let h = relative_entropy(&rho).unwrap();
        assert!(h > 0.0);
        assert!(h >= csiszar_kullback_bound(&rho).unwrap());

        let off = DensityProfile::from_fn(g, |y| 2.0 * (-y[0] * y[0]).exp()).unwrap();
        assert!(matches!(relative_entropy(&off), Err(Error::Precondition(_))));
    }

    #[test]
    fn kinetic_pseudo_energy_of_gamma() {
        let g = grid1();
        let v = gamma_field(g, 0.0);
        let traj = solve_tau(1.0, 1.0, 1e-10).unwrap();
        let p = ModelParams::logarithmic(1.0);
        let pe = pseudo_energy(&v, &traj, &p, PI.powf(0.25)).unwrap();
        assert!((pe.e_kin - PI.sqrt() / 4.0).abs() < 1e-10);
        assert!(pe.e_ent.abs() < 1e-10);
        assert_eq!(pe.e_pow, 0.0);
    }

    #[test]
    fn momentum_pair_of_real_even_profile() {
        let (i1, i2) = momentum_pair(&gamma_field(grid1(), 0.0));
        assert!(i1[0].abs() < 1e-14);
        assert!(i2[0].abs() < 1e-14);
    }

    #[test]
    fn to_v_at_time_zero() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let u = WaveField::from_fn(g, 0.0, |x| Complex64::new(2.0, 1.0) * (-0.3 * x[0] * x[0]).exp());
        let traj = solve_tau(1.0, 1.0, 1e-10).unwrap();
        let v = to_v(&u, &traj, u.norm()).unwrap();
        let c = PI.powf(0.25) / u.norm();
        for (a, b) in v.values.iter().zip(&u.values) {
            assert_eq!(*a, b * c);
        }
        assert!((v.norm_sq() - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn to_v_rejects_coarse_y_grid() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let u = WaveField::zeros(g, 0.0);
        let traj = solve_tau(1.0, 1.0, 1e-10).unwrap();
        assert!(matches!(to_v(&u, &traj, 1.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn wasserstein_examples() {
        let g = grid1();
        let gamma = DensityProfile::gamma_sq(g);
        assert_eq!(wasserstein2_1d(&gamma, &gamma).unwrap(), 0.0);

        let h = g.spacing();
        let c = 20.0 * h;
        let shifted = DensityProfile::from_fn(g, |y| (-(y[0] - c).powi(2)).exp()).unwrap();
        assert!((wasserstein2_1d(&gamma, &shifted).unwrap() - c).abs() < 1e-10);

        let wide = DensityProfile::from_fn(g, |y| (-(y[0] / 2.0).powi(2)).exp() / 2.0).unwrap();
        assert!((wasserstein2_1d(&gamma, &wide).unwrap() - 0.5f64.sqrt()).abs() < 1e-4);

        let g2 = Grid::new(2, 16, 3.0).unwrap();
        let r2 = DensityProfile::gamma_sq(g2);
        assert!(matches!(
            wasserstein2_1d(&r2, &r2),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn sobolev_norm_examples() {
        let v = gamma_field(grid1(), 0.0);
        assert!((sobolev_norm(&v, 1.0).unwrap() - (PI.sqrt() / 2.0).sqrt()).abs() < 1e-8);
        let c = WaveField::from_fn(grid1(), 0.0, |_| Complex64::new(3.0, -1.0));
        assert!(sobolev_norm(&c, 0.5).unwrap() < 1e-12);
        assert!(matches!(sobolev_norm(&v, 0.0), Err(Error::Domain(_))));
        assert!(matches!(sobolev_norm(&v, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn residuals_vanish_for_exact_series() {
        // I₁ = −2λ t, I₂ = 1, τ = ∞ is consistent to all orders
        let t: Vec<f64> = (0..11).map(|k| 0.1 * k as f64).collect();
        let i1: Vec<f64> = t.iter().map(|t| -2.0 * t).collect();
        let i2 = vec![1.0; t.len()];
        let tau = vec![f64::INFINITY; t.len()];
        for (r1, r2) in momentum_pair_residuals(&t, &i1, &i2, &tau, 1.0).unwrap() {
            assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
        }
    }

    #[test]
    fn diagnostics_csv_layout() {
        let g = Grid::new(1, 256, 10.0).unwrap();
        let u = gamma_field(g, 0.0);
        let traj = solve_tau(1.0, 1.0, 1e-10).unwrap();
        let p = ModelParams::logarithmic(1.0);
        let rec = diagnose(&u, &traj, &p, u.norm(), &[0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_diagnostics_csv(&[rec.clone(), rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "t,s,mass,J_1,energy,energy_reg,E_kin,E_ent,pseudo_E,m0,m1_1,m2,I1_1,I2_1,W2,a_priori,Hs_0.5,Hs_1"
        );
        let ncol = header.split(',').count();
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').count(), ncol);
        }
    }
}
