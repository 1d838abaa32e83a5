//! Strang evolution of the rescaled profile in the frame `y = x/τ(t)`.
//!
//! Substituting `u(t,x) = c τ^{−d/2} v(t, x/τ) e^{iτ̇|x|²/(2τ)}` with
//! `c = ‖u₀‖/‖γ‖` into the regularized equation and using `ττ̈ = 2λ` gives
//!
//! ```text
//! i ∂ₜv + Δ_y v/(2τ²) = [λ ln(ε + c²τ^{−d}|v|²) + λ|y|² + μ (c²τ^{−d}|v|²)^σ] v.
//! ```
//!
//! The quadratic phase of `u` is gone and the kinetic coefficient decays like
//! `τ^{−2}`, so the grid needs no refinement and large logarithmic steps stay
//! stable. The physical box is `τ(t)` times the `y`-box and widens with the
//! solution. The profile produced here equals [`to_v`](crate::rescale::to_v)
//! of the `x`-frame solution.

use num_complex::Complex64;

use crate::dispersion::TauTrajectory;
use crate::error::{Error, Result};
use crate::field::WaveField;
use crate::pde::{
    g_eps, pad_space, refine, spectral_edge_fraction, split_span, validate_schedule, GridChange,
    GrowthPolicy, LogStepSchedule, ModelParams,
};
use crate::rescale::{gamma_mass, profile_diagnostics, DiagnosticsRecord};
use crate::spectral::Spectral;

/// Largest kinetic phase `Δt·|k|²_max/(2τ²)` allowed in one step.
pub const MAX_KINETIC_PHASE: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct ComovingRunOutput {
    /// Profiles `v` at the requested times.
    pub snapshots: Vec<WaveField>,
    /// Records at `t = 0`, at every snapshot time and at `t_end`. Mass,
    /// momentum and energies refer to `u`.
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_profile: WaveField,
    pub steps: usize,
    pub max_shell_fraction: f64,
    pub grid_changes: Vec<GridChange>,
}

struct ComovingStepper<'a> {
    params: ModelParams,
    traj: &'a TauTrajectory,
    c: f64,
    spectral: Spectral,
    k2: Vec<f64>,
    r2: Vec<f64>,
}

impl<'a> ComovingStepper<'a> {
    fn new(v: &WaveField, params: ModelParams, traj: &'a TauTrajectory, c: f64) -> Self {
        let g = v.grid;
        Self {
            params,
            traj,
            c,
            spectral: Spectral::new(g),
            k2: g.wavenumber_sq(),
            r2: (0..g.len()).map(|i| g.radius_sq(i)).collect(),
        }
    }

    /// `∫_{t0}^{t1} τ^{−2}` by three-point Gauss–Legendre.
    fn inv_tau_sq(&self, t0: f64, t1: f64) -> Result<f64> {
        let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
        let node = (0.6f64).sqrt() * half;
        let f = |t: f64| -> Result<f64> { Ok(self.traj.tau(t)?.powi(-2)) };
        Ok(half * (5.0 * f(mid - node)? + 8.0 * f(mid)? + 5.0 * f(mid + node)?) / 9.0)
    }

    fn kinetic(&mut self, v: &mut [Complex64], weight: f64) {
        let norm = 1.0 / v.len() as f64;
        self.spectral.forward(v);
        for (z, k) in v.iter_mut().zip(&self.k2) {
            *z *= Complex64::from_polar(norm, -0.5 * weight * k);
        }
        self.spectral.inverse_unnormalized(v);
    }

    fn nonlinear(&self, v: &mut [Complex64], dt: f64, tau: f64) {
        let amp2 = self.c * self.c * tau.powi(-(self.spectral.grid().dim as i32));
        let lambda = self.params.lambda;
        for (z, r2) in v.iter_mut().zip(&self.r2) {
            let rate = self.params.phase_rate(amp2 * z.norm_sqr()) + lambda * r2;
            *z *= Complex64::from_polar(1.0, -dt * rate);
        }
    }

    fn step(&mut self, v: &mut [Complex64], t: f64, dt: f64) -> Result<()> {
        let mid = t + 0.5 * dt;
        let w1 = self.inv_tau_sq(t, mid)?;
        let w2 = self.inv_tau_sq(mid, t + dt)?;
        let tau_mid = self.traj.tau(mid)?;
        self.kinetic(v, w1);
        self.nonlinear(v, dt, tau_mid);
        self.kinetic(v, w2);
        Ok(())
    }
}

/// Mass, momentum and both energies of `u`, evaluated from its profile `v`
/// without leaving the `y`-grid.
pub fn physical_record(
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
) -> Result<DiagnosticsRecord> {
    physical_record_with(v, traj, params, u0_norm, &mut Spectral::new(v.grid))
}

fn physical_record_with(
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
    spectral: &mut Spectral,
) -> Result<DiagnosticsRecord> {
    let g = v.grid;
    let (tau, tau_dot) = traj.eval(v.t)?;
    let w = g.cell_volume();
    let c2 = u0_norm * u0_norm / gamma_mass(g.dim);
    let vol = tau.powi(g.dim as i32);
    let amp2 = c2 / vol;

    let mut momentum = Vec::with_capacity(g.dim);
    let mut cross = 0.0;
    for a in 0..g.dim {
        let grad = spectral.gradient(&v.values, a);
        let (mut i1, mut i2, mut yi1) = (0.0, 0.0, 0.0);
        for (flat, (z, dz)) in v.values.iter().zip(&grad).enumerate() {
            let y = g.point(flat)[a];
            let j = (z.conj() * dz).im;
            i1 += j;
            yi1 += y * j;
            i2 += y * z.norm_sqr();
        }
        momentum.push(c2 * w * (i1 / tau + tau_dot * i2));
        cross += w * yi1;
    }
    let grad_v = spectral.homogeneous_sobolev_sq(&v.values, 1.0);
    let (mut y2, mut ent, mut greg, mut pow) = (0.0, 0.0, 0.0, 0.0);
    for (flat, z) in v.values.iter().enumerate() {
        let rho = z.norm_sqr();
        let r = amp2 * rho;
        y2 += g.radius_sq(flat) * rho;
        if r > 0.0 {
            ent += rho * r.ln();
        }
        greg += g_eps(r, params.epsilon);
        if params.mu > 0.0 {
            pow += r.powf(params.sigma + 1.0);
        }
    }
    let grad_u = c2 * (grad_v / (tau * tau) + 2.0 * tau_dot / tau * cross + tau_dot * tau_dot * w * y2);
    let mut energy = 0.5 * grad_u + params.lambda * c2 * w * ent;
    let mut energy_reg = 0.5 * grad_u + params.lambda * vol * w * greg;
    if params.mu > 0.0 {
        let p = params.mu / (params.sigma + 1.0) * vol * w * pow;
        energy += p;
        energy_reg += p;
    }
    Ok(DiagnosticsRecord {
        t: v.t,
        mass: c2 * v.norm_sq(),
        momentum,
        energy,
        energy_reg,
        ..DiagnosticsRecord::default()
    })
}

fn full_record(
    v: &WaveField,
    traj: &TauTrajectory,
    params: &ModelParams,
    u0_norm: f64,
    spectral: &mut Spectral,
) -> Result<DiagnosticsRecord> {
    let mut rec = physical_record_with(v, traj, params, u0_norm, spectral)?;
    profile_diagnostics(&mut rec, v, traj, params, u0_norm, spectral)?;
    Ok(rec)
}

/// Evolves `u0` (given at `t = 0` on the `x`-grid, which is also the initial
/// `y`-grid) in the co-moving frame with a logarithmic step schedule, capped so
/// the kinetic phase per step stays below [`MAX_KINETIC_PHASE`]. The
/// `y`-box doubles when its boundary shell fills and the spacing halves when
/// the outer frequency band fills; the run aborts when the shell mass exceeds
/// `policy.abort_threshold` of the total.
pub fn run_comoving(
    u0: &WaveField,
    params: &ModelParams,
    traj: &TauTrajectory,
    t_end: f64,
    schedule: &LogStepSchedule,
    snapshot_times: &[f64],
    policy: &GrowthPolicy,
) -> Result<ComovingRunOutput> {
    validate_schedule(t_end, snapshot_times)?;
    params.validate(u0.grid.dim)?;
    if !(params.lambda > 0.0) || (traj.lambda() - params.lambda).abs() > 1e-12 * params.lambda {
        return Err(Error::InvalidParameter(format!(
            "co-moving runs need λ > 0 matching the trajectory (λ = {}, trajectory λ = {})",
            params.lambda,
            traj.lambda()
        )));
    }
    if t_end > traj.t_end() {
        return Err(Error::Domain(format!(
            "t_end = {t_end} beyond the trajectory range [0, {}]",
            traj.t_end()
        )));
    }
    if !(schedule.dt_min > 0.0 && schedule.dt_max >= schedule.dt_min && schedule.fraction > 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "invalid step schedule {schedule:?}"
        )));
    }
    if !u0.is_finite() {
        return Err(Error::InvalidParameter("initial field is not finite".into()));
    }
    let u0_norm = u0.norm();
    if !(u0_norm > 0.0) {
        return Err(Error::InvalidParameter("initial field is zero".into()));
    }
    let c = u0_norm / gamma_mass(u0.grid.dim).sqrt();

    // τ(0) = 1 and τ̇(0) = 0, so v(0) = u₀/c on the same grid
    let mut v = WaveField::new(u0.grid, u0.values.iter().map(|z| z / c).collect(), 0.0)?;
    let mass0 = v.norm_sq();
    let mut stepper = ComovingStepper::new(&v, *params, traj, c);
    let mut steps = 0;
    let mut max_shell = v.shell_mass(policy.shell_fraction) / mass0;
    let mut grid_changes = vec![GridChange {
        t: 0.0,
        n: v.grid.n,
        half_width: v.grid.half_width,
    }];
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut diagnostics = vec![full_record(&v, traj, params, u0_norm, &mut stepper.spectral)?];

    let mut stops: Vec<(f64, bool)> = snapshot_times.iter().map(|&t| (t, true)).collect();
    stops.push((t_end, false));
    for (stop, is_snapshot) in stops {
        while v.t < stop {
            loop {
                let shell = v.shell_mass(policy.shell_fraction) / mass0;
                let edge = spectral_edge_fraction(&v, &mut stepper.spectral, policy.shell_fraction);
                let grow = shell > policy.grow_threshold;
                let refine_now = edge > policy.spectral_threshold;
                if !grow && !refine_now {
                    break;
                }
                if v.grid.len() * (1 << v.grid.dim) > policy.max_points {
                    if refine_now {
                        return Err(Error::Resolution(format!(
                            "spectral edge fraction {edge:.3e} at t = {} with the grid at its size limit",
                            v.t
                        )));
                    }
                    break;
                }
                v = if grow { pad_space(&v)? } else { refine(&v)? };
                stepper = ComovingStepper::new(&v, *params, traj, c);
                grid_changes.push(GridChange {
                    t: v.t,
                    n: v.grid.n,
                    half_width: v.grid.half_width,
                });
            }

            let g = v.grid;
            let k_max_sq = g.dim as f64 * (std::f64::consts::PI * (g.n / 2) as f64 / g.half_width).powi(2);
            let dt = schedule
                .dt_at(v.t)
                .min(2.0 * MAX_KINETIC_PHASE * traj.tau(v.t)?.powi(2) / k_max_sq);
            let horizon = (v.t + dt * policy.check_interval.max(1) as f64).min(stop);
            let (n, h) = split_span(horizon - v.t, dt);
            let start = v.clone();
            for i in 0..n {
                stepper.step(&mut v.values, start.t + i as f64 * h, h)?;
            }
            if !v.is_finite() {
                return Err(Error::NumericalBlowup {
                    t: horizon,
                    step: steps + n,
                    snapshot: Box::new(start),
                });
            }
            steps += n;
            v.t = horizon;
            let shell = v.shell_mass(policy.shell_fraction) / mass0;
            max_shell = max_shell.max(shell);
            if shell > policy.abort_threshold {
                return Err(Error::MassLeak {
                    t: v.t,
                    shell_fraction: shell,
                });
            }
        }
        if is_snapshot {
            v.t = stop;
            if stop > 0.0 {
                diagnostics.push(full_record(&v, traj, params, u0_norm, &mut stepper.spectral)?);
            }
            snapshots.push(v.clone());
        }
    }

    if diagnostics.last().map(|r| r.t) != Some(t_end) {
        diagnostics.push(full_record(&v, traj, params, u0_norm, &mut stepper.spectral)?);
    }
    Ok(ComovingRunOutput {
        snapshots,
        diagnostics,
        final_profile: v,
        steps,
        max_shell_fraction: max_shell,
        grid_changes,
    })
}
