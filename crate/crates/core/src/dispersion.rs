//! The universal dispersion `τ̈ = 2λ/τ`, `τ(0) = 1`, `τ̇(0) = 0`, its
//! large-time asymptotics, and the logarithmic time `s = ½ ln τ̇`.
//!
//! Multiplying the ODE by `τ̇` and integrating gives the first integral
//! `τ̇² = 4λ ln τ`. The integrator restarts at every doubling of `t` (for
//! `t ≥ 1`) and re-imposes it on `τ̇`; the corrections are kept on the
//! trajectory for inspection.

use std::io::Write;

use crate::error::{Error, Result};
use crate::ode::{Correction, DenseTrajectory, Dopri5, OdeSystem};

struct TauOde {
    lambda: f64,
}

impl OdeSystem for TauOde {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = 2.0 * self.lambda / y[0];
    }

    fn rhs_dot(&self, _t: f64, y: &[f64], dy: &[f64], ddy: &mut [f64]) {
        ddy[0] = dy[1];
        ddy[1] = -2.0 * self.lambda * y[1] / (y[0] * y[0]);
    }

    fn project(&self, _t: f64, y: &mut [f64]) -> f64 {
        if y[0] <= 1.0 || y[1] <= 0.0 {
            return 0.0;
        }
        let target = (4.0 * self.lambda * y[0].ln()).sqrt();
        let rel = (target - y[1]).abs() / target;
        y[1] = target;
        rel
    }

    fn check(&self, _t: f64, y: &[f64]) -> Option<String> {
        (y[0] <= 0.0).then(|| format!("tau became non-positive ({})", y[0]))
    }
}

/// One stored point of a [`TauTrajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauKnot {
    pub t: f64,
    pub tau: f64,
    pub tau_dot: f64,
}

/// Dense solution of the universal dispersion ODE on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct TauTrajectory {
    lambda: f64,
    rel_tol: f64,
    dense: DenseTrajectory,
    corrections: Vec<Correction>,
}

impl TauTrajectory {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    /// Interpolation order of the dense output.
    pub fn interpolation_order(&self) -> usize {
        5
    }

    pub fn corrections(&self) -> &[Correction] {
        &self.corrections
    }

    pub fn knots(&self) -> impl Iterator<Item = TauKnot> + '_ {
        (0..self.dense.len()).map(|i| {
            let y = self.dense.knot(i);
            TauKnot {
                t: self.dense.times()[i],
                tau: y[0],
                tau_dot: y[1],
            }
        })
    }

    pub fn knot_count(&self) -> usize {
        self.dense.len()
    }

    /// `(τ, τ̇)` at `t ∈ [0, t_end]`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let mut y = [0.0; 2];
        let mut dy = [0.0; 2];
        self.dense.eval(t, &mut y, &mut dy).ok_or_else(|| {
            Error::Domain(format!(
                "t = {t} outside trajectory range [0, {}]",
                self.t_end()
            ))
        })?;
        Ok((y[0], y[1]))
    }

    pub fn tau(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0)
    }

    pub fn tau_dot(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.1)
    }

    /// `τ̈ = 2λ/τ`, recovered from the ODE.
    pub fn tau_ddot(&self, t: f64) -> Result<f64> {
        Ok(2.0 * self.lambda / self.tau(t)?)
    }

    /// `τ̇² − 4λ ln τ`, zero for the exact solution.
    pub fn first_integral_defect(&self, tau: f64, tau_dot: f64) -> f64 {
        tau_dot * tau_dot - 4.0 * self.lambda * tau.ln()
    }

    pub fn max_first_integral_defect(&self) -> f64 {
        self.knots()
            .map(|k| self.first_integral_defect(k.tau, k.tau_dot).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `t,tau,tau_dot,first_integral_defect` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,tau,tau_dot,first_integral_defect")?;
        for k in self.knots() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                k.t,
                k.tau,
                k.tau_dot,
                self.first_integral_defect(k.tau, k.tau_dot)
            )?;
        }
        Ok(())
    }
}

/// Integrates `τ̈ = 2λ/τ` on `[0, t_end]` with relative accuracy `rel_tol`.
pub fn solve_tau(lambda: f64, t_end: f64, rel_tol: f64) -> Result<TauTrajectory> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(rel_tol > 0.0 && rel_tol <= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must lie in (0, 1e-3], got {rel_tol}"
        )));
    }

    let mut blocks = Vec::new();
    let mut b = 1.0;
    while b < t_end {
        blocks.push(b);
        b *= 2.0;
    }

    let mut solver = Dopri5::new(rel_tol * 1e-2, rel_tol * 1e-4);
    solver.max_correction = Some(10.0 * rel_tol);
    let (dense, corrections) = solver.integrate(&TauOde { lambda }, 0.0, &[1.0, 0.0], t_end, &blocks)?;
    Ok(TauTrajectory {
        lambda,
        rel_tol,
        dense,
        corrections,
    })
}

/// `ℓ(t) = ln ln t / ln t`, defined for `t > e`.
pub fn ell(t: f64) -> Result<f64> {
    if !(t > std::f64::consts::E) {
        return Err(Error::Domain(format!("ell(t) needs t > e, got {t}")));
    }
    let lt = t.ln();
    Ok(lt.ln() / lt)
}

/// Leading-order asymptotics `(2t√(λ ln t), 2√(λ ln t))` of `(τ, τ̇)`.
pub fn tau_asymptotic(t: f64, lambda: f64) -> Result<(f64, f64)> {
    if !(t > std::f64::consts::E) {
        return Err(Error::Domain(format!(
            "tau asymptotics need t > e, got {t}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let root = (lambda * t.ln()).sqrt();
    Ok((2.0 * t * root, 2.0 * root))
}

/// Logarithmic time `s = ½ ln τ̇(t)`; undefined at `t = 0`.
pub fn s_of_t(traj: &TauTrajectory, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "s(t) needs t > 0 (tau_dot vanishes at 0), got {t}"
        )));
    }
    let td = traj.tau_dot(t)?;
    Ok(0.5 * td.ln())
}
