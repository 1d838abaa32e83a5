//! Strang-split pseudospectral solver for
//!
//! ```text
//! i ∂ₜu + ½Δu = λ ln(ε + |u|²) u + μ |u|^{2σ} u
//! ```
//!
//! on a periodic box. The free flow is applied exactly in Fourier space and the
//! nonlinear flow is an exact pointwise phase rotation, so both preserve the
//! grid mass.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::rescale::DiagnosticsRecord;
use crate::spectral::Spectral;

pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    /// Only read when `mu > 0`.
    pub sigma: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, sigma: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            lambda,
            mu,
            sigma,
            epsilon,
        };
        p.validate(1)?;
        Ok(p)
    }

    /// Pure logarithmic nonlinearity with the default regularization.
    pub fn logarithmic(lambda: f64) -> Self {
        Self {
            lambda,
            mu: 0.0,
            sigma: 1.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_power(self, mu: f64, sigma: f64) -> Self {
        Self { mu, sigma, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonzero, got {}",
                self.lambda
            )));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mu must be nonnegative, got {}",
                self.mu
            )));
        }
        if self.mu > 0.0 {
            if !(self.sigma > 0.0) || !self.sigma.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive when mu > 0, got {}",
                    self.sigma
                )));
            }
            if dim >= 3 && self.sigma >= 2.0 / (dim as f64 - 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "sigma = {} is not energy-subcritical in d = {dim}",
                    self.sigma
                )));
            }
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// `λ ln(ε + ρ) + μ ρ^σ`; zero at `ρ = 0` when `ε = 0`.
    pub(crate) fn phase_rate(&self, rho: f64) -> f64 {
        let arg = self.epsilon + rho;
        let mut rate = if arg > 0.0 { self.lambda * arg.ln() } else { 0.0 };
        if self.mu > 0.0 {
            let p = if self.sigma.fract() == 0.0 {
                rho.powi(self.sigma as i32)
            } else {
                rho.powf(self.sigma)
            };
            rate += self.mu * p;
        }
        rate
    }
}

/// Reusable Strang stepper for one grid, parameter set and step size.
pub struct Stepper {
    params: ModelParams,
    spectral: Spectral,
    k2: Vec<f64>,
    dt: f64,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: Grid, params: ModelParams, dt: f64) -> Result<Self> {
        params.validate(grid.dim)?;
        let mut s = Self {
            params,
            spectral: Spectral::new(grid),
            k2: grid.wavenumber_sq(),
            dt: 0.0,
            half: Vec::new(),
            full: Vec::new(),
        };
        s.set_dt(dt)?;
        Ok(s)
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if dt == self.dt {
            return Ok(());
        }
        self.dt = dt;
        // the inverse transform is unnormalized, so 1/N is folded in here
        let norm = 1.0 / self.k2.len() as f64;
        self.half = self
            .k2
            .iter()
            .map(|k| Complex64::from_polar(norm, -0.25 * dt * k))
            .collect();
        self.full = self
            .k2
            .iter()
            .map(|k| Complex64::from_polar(norm, -0.5 * dt * k))
            .collect();
        Ok(())
    }

    fn nonlinear(&self, u: &mut [Complex64]) {
        for z in u.iter_mut() {
            let rate = self.params.phase_rate(z.norm_sqr());
            *z *= Complex64::from_polar(1.0, -self.dt * rate);
        }
    }

    fn kinetic(&mut self, u: &mut [Complex64], full: bool) {
        self.spectral.forward(u);
        let m = if full { &self.full } else { &self.half };
        for (z, f) in u.iter_mut().zip(m) {
            *z *= f;
        }
        self.spectral.inverse_unnormalized(u);
    }

    /// `steps` Strang steps with adjacent half free flows merged.
    pub fn advance(&mut self, u: &mut [Complex64], steps: usize) {
        if steps == 0 {
            return;
        }
        self.kinetic(u, false);
        for i in 0..steps {
            self.nonlinear(u);
            self.kinetic(u, i + 1 < steps);
        }
    }

    /// One Strang step; on non-finite output the field is left untouched.
    pub fn step(&mut self, field: &mut WaveField, step_index: usize) -> Result<()> {
        let mut next = field.values.clone();
        self.advance(&mut next, 1);
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalBlowup {
                t: field.t + self.dt,
                step: step_index,
                snapshot: Box::new(field.clone()),
            });
        }
        field.values = next;
        field.t += self.dt;
        Ok(())
    }

    pub fn spectral(&mut self) -> &mut Spectral {
        &mut self.spectral
    }
}

/// One Strang step of size `dt`.
pub fn step_strang(field: &WaveField, params: &ModelParams, dt: f64) -> Result<WaveField> {
    if !field.is_finite() {
        return Err(Error::InvalidParameter("input field is not finite".into()));
    }
    let mut stepper = Stepper::new(field.grid, *params, dt)?;
    let mut out = field.clone();
    stepper.step(&mut out, 0)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Abort when the boundary shell holds more than this fraction of the mass.
    pub leak_threshold: Option<f64>,
    /// Width of the boundary shell as a fraction of the half-width.
    pub shell_fraction: f64,
    /// Steps between blow-up and leak checks.
    pub check_interval: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            leak_threshold: Some(1e-6),
            shell_fraction: 0.05,
            check_interval: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Fields at the requested snapshot times.
    pub snapshots: Vec<WaveField>,
    /// Conserved quantities at `t = 0` and at every snapshot time.
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_field: WaveField,
    pub steps: usize,
    pub max_shell_fraction: f64,
}

pub(crate) fn validate_schedule(t_end: f64, snapshot_times: &[f64]) -> Result<()> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_end must be nonnegative, got {t_end}"
        )));
    }
    for w in snapshot_times.windows(2) {
        if !(w[1] >= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "snapshot times must be sorted, found {} after {}",
                w[1], w[0]
            )));
        }
    }
    if let Some(bad) = snapshot_times
        .iter()
        .find(|&&s| !(s >= 0.0) || s > t_end * (1.0 + 1e-12))
    {
        return Err(Error::InvalidParameter(format!(
            "snapshot time {bad} outside [0, {t_end}]"
        )));
    }
    Ok(())
}

/// Steps of size at most `dt` that land exactly on `span`.
pub(crate) fn split_span(span: f64, dt: f64) -> (usize, f64) {
    if span <= 0.0 {
        return (0, dt);
    }
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

/// Advances `u` by `steps` steps in chunks, checking finiteness and the
/// boundary shell after each chunk.
fn advance_checked(
    stepper: &mut Stepper,
    u: &mut WaveField,
    steps: usize,
    step_counter: &mut usize,
    opts: &RunOptions,
    mass0: f64,
    max_shell: &mut f64,
) -> Result<()> {
    let interval = opts.check_interval.max(1);
    let mut remaining = steps;
    while remaining > 0 {
        let chunk = remaining.min(interval);
        let start = u.values.clone();
        stepper.advance(&mut u.values, chunk);
        if !u.is_finite() {
            // replay the chunk one step at a time to locate the failure
            let mut probe = WaveField::new(u.grid, start, u.t)?;
            for i in 0..chunk {
                stepper.step(&mut probe, *step_counter + i + 1)?;
            }
            return Err(Error::NumericalBlowup {
                t: probe.t,
                step: *step_counter + chunk,
                snapshot: Box::new(probe),
            });
        }
        u.t += chunk as f64 * stepper.dt();
        *step_counter += chunk;
        remaining -= chunk;
        let frac = u.shell_mass(opts.shell_fraction) / mass0;
        *max_shell = max_shell.max(frac);
        if let Some(limit) = opts.leak_threshold {
            if frac > limit {
                return Err(Error::MassLeak {
                    t: u.t,
                    shell_fraction: frac,
                });
            }
        }
    }
    Ok(())
}

/// Fixed-step Strang evolution to `t_end`, recording snapshots.
pub fn run(
    u0: &WaveField,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<RunOutput> {
    run_with(u0, params, t_end, dt, snapshot_times, &RunOptions::default())
}

/// [`run`] with explicit monitoring options. Each interval between stops is
/// covered by equal steps no larger than `dt`.
pub fn run_with(
    u0: &WaveField,
    params: &ModelParams,
    t_end: f64,
    dt: f64,
    snapshot_times: &[f64],
    opts: &RunOptions,
) -> Result<RunOutput> {
    validate_schedule(t_end, snapshot_times)?;
    if !u0.is_finite() {
        return Err(Error::InvalidParameter("initial field is not finite".into()));
    }
    let mut stepper = Stepper::new(u0.grid, *params, dt)?;
    let mut u = u0.clone();
    u.t = 0.0;
    let mass0 = u.norm_sq();
    let mut steps = 0;
    let mut max_shell = u.shell_mass(opts.shell_fraction) / mass0;
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut diagnostics = vec![conserved_record(&u, params, stepper.spectral())];

    for &ts in snapshot_times {
        let (n, h) = split_span(ts - u.t, dt);
        if n > 0 {
            stepper.set_dt(h)?;
            advance_checked(&mut stepper, &mut u, n, &mut steps, opts, mass0, &mut max_shell)?;
        }
        u.t = ts;
        if ts > 0.0 {
            diagnostics.push(conserved_record(&u, params, stepper.spectral()));
        }
        snapshots.push(u.clone());
    }
    let (n, h) = split_span(t_end - u.t, dt);
    if n > 0 {
        stepper.set_dt(h)?;
        advance_checked(&mut stepper, &mut u, n, &mut steps, opts, mass0, &mut max_shell)?;
        u.t = t_end;
    }

    Ok(RunOutput {
        snapshots,
        diagnostics,
        final_field: u,
        steps,
        max_shell_fraction: max_shell,
    })
}

/// Step-size rule `dt(t) = clamp(fraction·t, dt_min, dt_max)`, frozen over each
/// chunk of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogStepSchedule {
    pub dt_min: f64,
    pub fraction: f64,
    pub dt_max: f64,
}

impl LogStepSchedule {
    pub fn dt_at(&self, t: f64) -> f64 {
        (self.fraction * t).clamp(self.dt_min, self.dt_max)
    }
}

/// When and how the box of [`run_growing`] is enlarged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthPolicy {
    /// Shell mass fraction that triggers doubling the box.
    pub grow_threshold: f64,
    /// Shell mass fraction that aborts the run.
    pub abort_threshold: f64,
    /// Fraction of spectral energy in the outer frequency band that triggers
    /// halving the spacing.
    pub spectral_threshold: f64,
    pub shell_fraction: f64,
    pub check_interval: usize,
    pub max_points: usize,
}

impl Default for GrowthPolicy {
    fn default() -> Self {
        Self {
            grow_threshold: 1e-10,
            abort_threshold: 1e-6,
            spectral_threshold: 1e-12,
            shell_fraction: 0.05,
            check_interval: 16,
            max_points: 1 << 22,
        }
    }
}

/// A grid change made by [`run_growing`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChange {
    pub t: f64,
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone)]
pub struct GrowingRunOutput {
    pub snapshots: Vec<WaveField>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_field: WaveField,
    pub steps: usize,
    pub max_shell_fraction: f64,
    pub grid_changes: Vec<GridChange>,
}

/// Zero-pads the box to twice its half-width at the same spacing.
pub fn pad_space(field: &WaveField) -> Result<WaveField> {
    let g = field.grid;
    let big = Grid::new(g.dim, 2 * g.n, 2.0 * g.half_width)?;
    let mut out = WaveField::zeros(big, field.t);
    let off = g.n / 2;
    for (flat, z) in field.values.iter().enumerate() {
        let idx = g.unravel(flat);
        let mut target = 0;
        for a in 0..g.dim {
            target = target * big.n + idx[a] + off;
        }
        out.values[target] = *z;
    }
    Ok(out)
}

/// Band-limited interpolation onto a grid with half the spacing. The Nyquist
/// bin is dropped.
pub fn refine(field: &WaveField) -> Result<WaveField> {
    let g = field.grid;
    let fine = Grid::new(g.dim, 2 * g.n, g.half_width)?;
    let mut coarse = field.values.clone();
    Spectral::new(g).forward(&mut coarse);
    let mut out = vec![Complex64::default(); fine.len()];
    let map = |i: usize| -> Option<usize> {
        if i < g.n / 2 {
            Some(i)
        } else if i > g.n / 2 {
            Some(i + g.n)
        } else {
            None
        }
    };
    'outer: for (flat, z) in coarse.iter().enumerate() {
        let idx = g.unravel(flat);
        let mut target = 0;
        for a in 0..g.dim {
            match map(idx[a]) {
                Some(j) => target = target * fine.n + j,
                None => continue 'outer,
            }
        }
        out[target] = *z * (1 << g.dim) as f64;
    }
    Spectral::new(fine).inverse(&mut out);
    WaveField::new(fine, out, field.t)
}

/// Fraction of spectral energy in frequency bins beyond `(1 − fraction)` of
/// the Nyquist frequency along any axis.
pub fn spectral_edge_fraction(field: &WaveField, spectral: &mut Spectral, fraction: f64) -> f64 {
    let g = field.grid;
    let mut buf = field.values.clone();
    spectral.forward(&mut buf);
    let cut = ((1.0 - fraction) * (g.n / 2) as f64) as i64;
    let (mut edge, mut total) = (0.0, 0.0);
    for (flat, z) in buf.iter().enumerate() {
        let idx = g.unravel(flat);
        let e = z.norm_sqr();
        total += e;
        let outer = (0..g.dim).any(|a| {
            let i = idx[a] as i64;
            let m = if i < (g.n / 2) as i64 { i } else { i - g.n as i64 };
            m.abs() >= cut
        });
        if outer {
            edge += e;
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

/// Strang evolution with a log-scheduled step and a box that grows with the
/// solution: it doubles when the boundary shell fills and refines when the
/// outer frequency band fills.
pub fn run_growing(
    u0: &WaveField,
    params: &ModelParams,
    t_end: f64,
    schedule: &LogStepSchedule,
    snapshot_times: &[f64],
    policy: &GrowthPolicy,
) -> Result<GrowingRunOutput> {
    validate_schedule(t_end, snapshot_times)?;
    if !(schedule.dt_min > 0.0 && schedule.dt_max >= schedule.dt_min && schedule.fraction > 0.0)
    {
        return Err(Error::InvalidParameter(format!(
            "invalid step schedule {schedule:?}"
        )));
    }
    let mut u = u0.clone();
    u.t = 0.0;
    let mass0 = u.norm_sq();
    let mut stepper = Stepper::new(u.grid, *params, schedule.dt_at(0.0))?;
    let mut steps = 0;
    let mut max_shell = 0.0f64;
    let mut grid_changes = vec![GridChange {
        t: 0.0,
        n: u.grid.n,
        half_width: u.grid.half_width,
    }];
    let mut snapshots = Vec::with_capacity(snapshot_times.len());
    let mut diagnostics = vec![conserved_record(&u, params, stepper.spectral())];
    let opts = RunOptions {
        leak_threshold: Some(policy.abort_threshold),
        shell_fraction: policy.shell_fraction,
        check_interval: policy.check_interval,
    };

    let mut stops: Vec<(f64, bool)> = snapshot_times.iter().map(|&t| (t, true)).collect();
    stops.push((t_end, false));
    for (stop, is_snapshot) in stops {
        while u.t < stop {
            // adapt the grid before each chunk
            loop {
                let shell = u.shell_mass(policy.shell_fraction) / mass0;
                let edge = spectral_edge_fraction(&u, stepper.spectral(), policy.shell_fraction);
                let grow = shell > policy.grow_threshold;
                let refine_now = edge > policy.spectral_threshold;
                if !grow && !refine_now {
                    break;
                }
                if u.grid.len() * (1 << u.grid.dim) > policy.max_points {
                    if grow && shell > policy.abort_threshold {
                        return Err(Error::MassLeak {
                            t: u.t,
                            shell_fraction: shell,
                        });
                    }
                    if refine_now {
                        return Err(Error::Resolution(format!(
                            "spectral edge fraction {edge:.3e} at t = {} with the grid at its size limit",
                            u.t
                        )));
                    }
                    break;
                }
                u = if grow { pad_space(&u)? } else { refine(&u)? };
                stepper = Stepper::new(u.grid, *params, stepper.dt())?;
                            grid_changes.push(GridChange {
                    t: u.t,
                    n: u.grid.n,
                    half_width: u.grid.half_width,
                });
            }

            let dt = schedule.dt_at(u.t);
            let horizon = (u.t + dt * policy.check_interval.max(1) as f64).min(stop);
            let (n, h) = split_span(horizon - u.t, dt);
            stepper.set_dt(h)?;
            let target = horizon;
            advance_checked(&mut stepper, &mut u, n, &mut steps, &opts, mass0, &mut max_shell)?;
            u.t = target;
        }
        if is_snapshot {
            u.t = stop;
            if stop > 0.0 {
                diagnostics.push(conserved_record(&u, params, stepper.spectral()));
            }
            snapshots.push(u.clone());
        }
    }

    Ok(GrowingRunOutput {
        snapshots,
        diagnostics,
        final_field: u,
        steps,
        max_shell_fraction: max_shell,
        grid_changes,
    })
}

/// `M = ∫ |u|²`.
pub fn mass(field: &WaveField) -> f64 {
    field.norm_sq()
}

/// `J = Im ∫ ū ∇u`, one entry per axis.
pub fn momentum(field: &WaveField) -> Vec<f64> {
    momentum_with(field, &mut Spectral::new(field.grid))
}

pub(crate) fn momentum_with(field: &WaveField, spectral: &mut Spectral) -> Vec<f64> {
    let w = field.grid.cell_volume();
    (0..field.grid.dim)
        .map(|a| {
            let g = spectral.gradient(&field.values, a);
            w * field
                .values
                .iter()
                .zip(&g)
                .map(|(u, du)| (u.conj() * du).im)
                .sum::<f64>()
        })
        .collect()
}

/// `‖∇u‖²` by Plancherel.
pub fn gradient_norm_sq(field: &WaveField, spectral: &mut Spectral) -> f64 {
    spectral.homogeneous_sobolev_sq(&field.values, 1.0)
}

fn power_integral(field: &WaveField, sigma: f64) -> f64 {
    field.grid.cell_volume()
        * field
            .values
            .iter()
            .map(|z| z.norm_sqr().powf(sigma + 1.0))
            .sum::<f64>()
}

/// `½‖∇u‖² + λ ∫ |u|² ln |u|² + μ/(σ+1) ∫ |u|^{2σ+2}`, with `0 ln 0 = 0`.
pub fn energy(field: &WaveField, params: &ModelParams) -> f64 {
    energy_with(field, params, &mut Spectral::new(field.grid))
}

pub(crate) fn energy_with(field: &WaveField, params: &ModelParams, spectral: &mut Spectral) -> f64 {
    let w = field.grid.cell_volume();
    let ent: f64 = field
        .values
        .iter()
        .map(|z| {
            let r = z.norm_sqr();
            if r > 0.0 {
                r * r.ln()
            } else {
                0.0
            }
        })
        .sum::<f64>()
        * w;
    let mut e = 0.5 * gradient_norm_sq(field, spectral) + params.lambda * ent;
    if params.mu > 0.0 {
        e += params.mu / (params.sigma + 1.0) * power_integral(field, params.sigma);
    }
    e
}

/// `G_ε(ρ) = (ε+ρ) ln(ε+ρ) − ρ − ε ln ε`, the antiderivative of `ln(ε+s)`
/// vanishing at 0.
pub fn g_eps(rho: f64, eps: f64) -> f64 {
    if eps > 0.0 {
        // (ε+ρ) ln(1 + ρ/ε) + ρ ln ε − ρ, free of the ε ln ε cancellation
        (eps + rho) * (rho / eps).ln_1p() + rho * eps.ln() - rho
    } else if rho > 0.0 {
        rho * rho.ln() - rho
    } else {
        0.0
    }
}

/// Energy of the regularized equation, conserved by its exact flow.
pub fn energy_reg(field: &WaveField, params: &ModelParams) -> f64 {
    energy_reg_with(field, params, &mut Spectral::new(field.grid))
}

pub(crate) fn energy_reg_with(
    field: &WaveField,
    params: &ModelParams,
    spectral: &mut Spectral,
) -> f64 {
    let w = field.grid.cell_volume();
    let g: f64 = field
        .values
        .iter()
        .map(|z| g_eps(z.norm_sqr(), params.epsilon))
        .sum::<f64>()
        * w;
    let mut e = 0.5 * gradient_norm_sq(field, spectral) + params.lambda * g;
    if params.mu > 0.0 {
        e += params.mu / (params.sigma + 1.0) * power_integral(field, params.sigma);
    }
    e
}

/// Mass, momentum and both energies of `field`.
pub fn conserved_record(
    field: &WaveField,
    params: &ModelParams,
    spectral: &mut Spectral,
) -> DiagnosticsRecord {
    DiagnosticsRecord {
        t: field.t,
        mass: mass(field),
        momentum: momentum_with(field, spectral),
        energy: energy_with(field, params, spectral),
        energy_reg: energy_reg_with(field, params, spectral),
        ..DiagnosticsRecord::default()
    }
}

/// Both sides of `|Im((z₂ ln|z₂|² − z₁ ln|z₁|²)(z̄₂ − z̄₁))| ≤ 4|z₂ − z₁|²`.
///
/// The left side equals `|Im(z₁ z̄₂)| · |ln|z₂|² − ln|z₁|²|`, which is evaluated
/// instead to avoid cancellation; it is zero when either argument vanishes.
pub fn log_inequality_sides(z1: Complex64, z2: Complex64) -> (f64, f64) {
    let rhs = 4.0 * (z2 - z1).norm_sqr();
    let (n1, n2) = (z1.norm_sqr(), z2.norm_sqr());
    if n1 == 0.0 || n2 == 0.0 {
        return (0.0, rhs);
    }
    let lhs = (z1 * z2.conj()).im.abs() * (n2.ln() - n1.ln()).abs();
    (lhs, rhs)
}

pub fn log_inequality_check(z1: Complex64, z2: Complex64) -> bool {
    let (lhs, rhs) = log_inequality_sides(z1, z2);
    lhs <= rhs
}

/// Sidecar describing a binary field snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format_version: u32,
    pub encoding: String,
    pub grid: Grid,
    pub t: f64,
    pub params: Option<ModelParams>,
}

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
pub const SNAPSHOT_ENCODING: &str = "f64-le-interleaved-re-im";

impl SnapshotMeta {
    pub fn for_field(field: &WaveField, params: Option<ModelParams>) -> Self {
        Self {
            format_version: SNAPSHOT_FORMAT_VERSION,
            encoding: SNAPSHOT_ENCODING.to_string(),
            grid: field.grid,
            t: field.t,
            params,
        }
    }
}

/// Raw little-endian `f64` pairs `(re, im)` in grid order.
pub fn write_field_binary<W: Write>(field: &WaveField, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * field.values.len());
    for z in &field.values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field_binary<R: Read>(meta: &SnapshotMeta, mut r: R) -> Result<WaveField> {
    if meta.format_version != SNAPSHOT_FORMAT_VERSION || meta.encoding != SNAPSHOT_ENCODING {
        return Err(Error::InvalidParameter(format!(
            "unsupported snapshot format {} / {}",
            meta.format_version, meta.encoding
        )));
    }
    let grid = Grid::new(meta.grid.dim, meta.grid.n, meta.grid.half_width)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * grid.len() {
        return Err(Error::InvalidParameter(format!(
            "snapshot holds {} bytes, grid needs {}",
            bytes.len(),
            16 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    WaveField::new(grid, values, meta.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: Grid) -> WaveField {
        WaveField::from_fn(grid, 0.0, |x| {
            Complex64::new((-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp(), 0.0)
        })
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0, 0.0).is_ok());
        assert!(ModelParams::new(1.0, 0.0, 1.0, -1e-3).is_err());
        let p = ModelParams::logarithmic(1.0).with_power(1.0, 2.0);
        assert!(p.validate(2).is_ok());
        assert!(p.validate(3).is_err());
        assert!(p.with_power(1.0, 1.5).validate(3).is_ok());
    }

    #[test]
    fn zero_field_is_fixed() {
        let grid = Grid::new(1, 64, 5.0).unwrap();
        let u = WaveField::zeros(grid, 0.0);
        for eps in [0.0, 1e-12] {
            let p = ModelParams::logarithmic(1.0).with_epsilon(eps);
            let v = step_strang(&u, &p, 0.1).unwrap();
            assert!(v.values.iter().all(|z| *z == Complex64::default()));
        }
    }

    #[test]
    fn free_flow_is_exact_per_mode() {
        // |u| = 1 and ε = 0 make ln|u|² vanish, leaving the free flow
        let grid = Grid::new(1, 64, PI).unwrap();
        let u = WaveField::from_fn(grid, 0.0, |x| Complex64::from_polar(1.0, 3.0 * x[0]));
        let p = ModelParams::logarithmic(1.0).with_epsilon(0.0);
        let v = step_strang(&u, &p, 0.2).unwrap();
        let phase = Complex64::from_polar(1.0, -0.5 * 0.2 * 9.0);
        for (a, b) in v.values.iter().zip(&u.values) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn conserved_quantities_of_gaussian() {
        let grid = Grid::new(1, 512, 12.0).unwrap();
        let u = gaussian(grid);
        assert!((mass(&u) - PI.sqrt()).abs() < 1e-10);
        assert!(momentum(&u)[0].abs() < 1e-14);
        let p = ModelParams::logarithmic(1.0).with_epsilon(0.0);
        assert!((energy(&u, &p) + PI.sqrt() / 4.0).abs() < 1e-10);
        // G_0 = ρ ln ρ − ρ
        assert!((energy_reg(&u, &p) - energy(&u, &p) + PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn g_eps_matches_direct_formula() {
        for (rho, eps) in [(0.5f64, 1e-3f64), (2.0, 0.1), (1e-20, 1e-12), (0.0, 1e-12)] {
            let direct = (eps + rho) * (eps + rho).ln() - rho - eps * eps.ln();
            assert!((g_eps(rho, eps) - direct).abs() < 1e-12);
        }
        assert_eq!(g_eps(0.0, 0.0), 0.0);
    }

    #[test]
    fn log_inequality_examples() {
        let z = Complex64::new(0.3, -0.7);
        assert!(log_inequality_check(z, z));
        assert_eq!(log_inequality_sides(z, z).0, 0.0);
        let (l, r) = log_inequality_sides(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        assert_eq!((l, r), (0.0, 4.0));
    }

    #[test]
    fn blowup_is_reported_with_last_finite_state() {
        let grid = Grid::new(1, 64, 5.0).unwrap();
        let mut u = gaussian(grid);
        u.values[3] = Complex64::new(f64::MAX, 0.0);
        let p = ModelParams::logarithmic(1.0).with_power(1.0, 1.0);
        match step_strang(&u, &p, 1e-3) {
            Err(Error::NumericalBlowup { snapshot, step, .. }) => {
                assert_eq!(step, 0);
                assert_eq!(snapshot.values, u.values);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn run_hits_snapshot_times() {
        let grid = Grid::new(1, 256, 15.0).unwrap();
        let u = gaussian(grid);
        let p = ModelParams::logarithmic(1.0);
        let out = run(&u, &p, 1.0, 0.03, &[0.0, 0.1, 0.55]).unwrap();
        let ts: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0.0, 0.1, 0.55]);
        assert_eq!(out.diagnostics.len(), 3);
        assert_eq!(out.final_field.t, 1.0);
        assert_eq!(out.snapshots[0].values, u.values);

        let out = run(&u, &p, 0.0, 0.01, &[]).unwrap();
        assert_eq!(out.final_field.values, u.values);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(run(&u, &p, 1.0, 0.01, &[0.5, 0.2]).is_err());
        assert!(run(&u, &p, 1.0, 0.01, &[2.0]).is_err());
    }

    #[test]
    fn leak_monitor_aborts() {
        let grid = Grid::new(1, 128, 4.0).unwrap();
        let u = gaussian(grid);
        let p = ModelParams::logarithmic(1.0);
        assert!(matches!(
            run(&u, &p, 5.0, 0.01, &[]),
            Err(Error::MassLeak { .. })
        ));
    }

    #[test]
    fn pad_and_refine_preserve_the_field() {
        let grid = Grid::new(2, 32, 6.0).unwrap();
        let u = gaussian(grid);
        let big = pad_space(&u).unwrap();
        assert_eq!(big.grid.n, 64);
        assert!((big.norm_sq() - u.norm_sq()).abs() < 1e-14);
        let expected = gaussian(big.grid);
        assert!(big.distance(&expected).unwrap() < 1e-7);

        let fine = refine(&u).unwrap();
        assert_eq!(fine.grid.spacing(), 0.5 * grid.spacing());
        let expected = gaussian(fine.grid);
        assert!(fine.distance(&expected).unwrap() < 1e-7);
    }

    #[test]
    fn snapshot_binary_roundtrip() {
        let grid = Grid::new(2, 16, 3.0).unwrap();
        let mut u = WaveField::from_fn(grid, 0.0, |x| Complex64::new(x[0], -x[1] * 0.3));
        u.t = 1.25;
        let meta = SnapshotMeta::for_field(&u, Some(ModelParams::logarithmic(1.0)));
        let mut buf = Vec::new();
        write_field_binary(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 * grid.len());
        let json = serde_json::to_string(&meta).unwrap();
        let meta2: SnapshotMeta = serde_json::from_str(&json).unwrap();
        let back = read_field_binary(&meta2, buf.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(read_field_binary(&meta2, &buf[..16]).is_err());
    }
}
