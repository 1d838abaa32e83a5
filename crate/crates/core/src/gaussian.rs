//! Exact propagation of Gaussian data.
//!
//! Gaussian initial data `u₀(x) = b₀ exp(−½ Σ a₀ⱼ (xⱼ − x₀ⱼ)²)` stays Gaussian.
//! Writing `aⱼ(t) = α₀ⱼ/rⱼ² − i ṙⱼ/rⱼ`, each axis reduces to
//!
//! ```text
//! r̈ = α₀²/r³ + 2λα₀/r,   r(0) = 1,   ṙ(0) = −β₀
//! ```
//!
//! with first integral `ṙ² = β₀² + α₀²(1 − 1/r²) + 4λα₀ ln r`. The amplitude is
//! `b(t) = b₀ exp(−iλt ln|b₀|² − (i/2) Σ Aⱼ − iλ Σ ∫ Im Aⱼ)` where `Aⱼ = ∫ aⱼ`.
//! The integrals are carried in the ODE state so the phase stays accurate over
//! long horizons.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use libm::tgamma as gamma;

use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::ode::{Correction, DenseTrajectory, Dopri5, OdeSystem};

/// Parameters of a Gaussian initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianInit {
    pub b0: Complex64,
    pub a0: Vec<Complex64>,
    pub x0: Vec<f64>,
}

impl GaussianInit {
    pub fn new(b0: Complex64, a0: Vec<Complex64>, x0: Vec<f64>) -> Result<Self> {
        let init = Self { b0, a0, x0 };
        init.validate()?;
        Ok(init)
    }

    /// Same width on every axis, centered at the origin.
    pub fn isotropic(dim: usize, b0: Complex64, a0: Complex64) -> Result<Self> {
        Self::new(b0, vec![a0; dim], vec![0.0; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.a0.len();
        if d == 0 {
            return Err(Error::InvalidParameter("Gaussian needs at least one axis".into()));
        }
        if self.x0.len() != d {
            return Err(Error::InvalidParameter(format!(
                "{} widths but {} centers",
                d,
                self.x0.len()
            )));
        }
        if !(self.b0.re.is_finite() && self.b0.im.is_finite()) {
            return Err(Error::InvalidParameter("b0 must be finite".into()));
        }
        for (j, a) in self.a0.iter().enumerate() {
            if !(a.re > 0.0) || !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "Re a0[{j}] must be positive and finite, got {a}"
                )));
            }
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("centers must be finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a0.len()
    }

    /// `‖u₀‖²_{L²} = |b₀|² ∏ √(π/α₀ⱼ)`.
    pub fn mass(&self) -> f64 {
        self.b0.norm_sqr() * self.a0.iter().map(|a| (PI / a.re).sqrt()).product::<f64>()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let e: Complex64 = self
            .a0
            .iter()
            .zip(&self.x0)
            .zip(x)
            .map(|((a, c), x)| -0.5 * a * (x - c) * (x - c))
            .sum();
        self.b0 * e.exp()
    }

    /// The initial datum sampled on `grid`.
    pub fn field(&self, grid: Grid) -> Result<WaveField> {
        if grid.dim != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "grid has d = {}, Gaussian has d = {}",
                grid.dim,
                self.dim()
            )));
        }
        Ok(WaveField::from_fn(grid, 0.0, |x| self.eval(x)))
    }
}

// State: r, ṙ, Re A, Im A, ∫ Im A.
struct AxisOde {
    alpha: f64,
    beta: f64,
    lambda: f64,
    floor: f64,
}

impl AxisOde {
    fn rddot(&self, r: f64) -> f64 {
        self.alpha * self.alpha / (r * r * r) + 2.0 * self.lambda * self.alpha / r
    }
}

impl OdeSystem for AxisOde {
    fn dim(&self) -> usize {
        5
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (r, rd) = (y[0], y[1]);
        dy[0] = rd;
        dy[1] = self.rddot(r);
        dy[2] = self.alpha / (r * r);
        dy[3] = -rd / r;
        dy[4] = y[3];
    }

    fn rhs_dot(&self, _t: f64, y: &[f64], dy: &[f64], ddy: &mut [f64]) {
        let (r, rd, rdd) = (y[0], y[1], dy[1]);
        let a = self.alpha;
        ddy[0] = rdd;
        ddy[1] = -3.0 * a * a * rd / r.powi(4) - 2.0 * self.lambda * a * rd / (r * r);
        ddy[2] = -2.0 * a * rd / (r * r * r);
        ddy[3] = -(rdd * r - rd * rd) / (r * r);
        ddy[4] = dy[3];
    }

    fn project(&self, _t: f64, y: &mut [f64]) -> f64 {
        if y[0] <= 1.0 || y[1] <= 0.0 {
            return 0.0;
        }
        let target = first_integral_rhs(self.alpha, self.beta, self.lambda, y[0]).sqrt();
        let rel = (target - y[1]).abs() / target;
        y[1] = target;
        rel
    }

    fn check(&self, _t: f64, y: &[f64]) -> Option<String> {
        if y[0] <= 0.0 {
            Some(format!("r became non-positive ({})", y[0]))
        } else if y[0] < self.floor {
            Some(format!(
                "r = {} fell below the lower bound {}",
                y[0], self.floor
            ))
        } else {
            None
        }
    }
}

fn first_integral_rhs(alpha: f64, beta: f64, lambda: f64, r: f64) -> f64 {
    beta * beta + alpha * alpha * (1.0 - 1.0 / (r * r)) + 4.0 * lambda * alpha * r.ln()
}

/// `exp(−(β₀² + α₀²)/(4λα₀))`, a positive lower bound for `r`.
pub fn r_lower_bound(alpha0: f64, beta0: f64, lambda: f64) -> f64 {
    (-(beta0 * beta0 + alpha0 * alpha0) / (4.0 * lambda * alpha0)).exp()
}

#[derive(Debug, Clone)]
struct AxisTrajectory {
    alpha: f64,
    beta: f64,
    dense: DenseTrajectory,
    corrections: Vec<Correction>,
}

/// Reduced variables of one axis at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisState {
    pub r: f64,
    pub r_dot: f64,
    pub re_a: f64,
    /// `Im A` as integrated; the exact value is `−ln r`.
    pub im_a_raw: f64,
    pub int_im_a: f64,
}

/// Closed-form Gaussian parameters at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub t: f64,
    pub a: Vec<Complex64>,
    pub b: Complex64,
    pub x0: Vec<f64>,
    pub axes: Vec<AxisState>,
}

impl GaussianState {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let e: Complex64 = self
            .a
            .iter()
            .zip(&self.x0)
            .zip(x)
            .map(|((a, c), x)| -0.5 * a * (x - c) * (x - c))
            .sum();
        self.b * e.exp()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianTrajectory {
    init: GaussianInit,
    lambda: f64,
    rel_tol: f64,
    axes: Vec<AxisTrajectory>,
}

/// Integrates the per-axis reduced system on `[0, t_end]`.
pub fn evolve_gaussian(
    init: &GaussianInit,
    lambda: f64,
    t_end: f64,
    rel_tol: f64,
) -> Result<GaussianTrajectory> {
    init.validate()?;
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

    let solve_axis = |a0: Complex64| -> Result<AxisTrajectory> {
        let (alpha, beta) = (a0.re, a0.im);
        let sys = AxisOde {
            alpha,
            beta,
            lambda,
            floor: r_lower_bound(alpha, beta, lambda) - 10.0 * rel_tol,
        };
        let (dense, corrections) =
            solver.integrate(&sys, 0.0, &[1.0, -beta, 0.0, 0.0, 0.0], t_end, &blocks)?;
        Ok(AxisTrajectory {
            alpha,
            beta,
            dense,
            corrections,
        })
    };

    let axes = if init.dim() == 1 {
        vec![solve_axis(init.a0[0])?]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = init
                .a0
                .iter()
                .map(|&a| scope.spawn(move || solve_axis(a)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("axis integration panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    };

    Ok(GaussianTrajectory {
        init: init.clone(),
        lambda,
        rel_tol,
        axes,
    })
}

impl GaussianTrajectory {
    pub fn init(&self) -> &GaussianInit {
        &self.init
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn t_end(&self) -> f64 {
        self.axes[0].dense.t_end()
    }

    /// Conserved `L²` mass.
    pub fn mass(&self) -> f64 {
        self.init.mass()
    }

    pub fn corrections(&self, axis: usize) -> &[Correction] {
        &self.axes[axis].corrections
    }

    pub fn knot_count(&self, axis: usize) -> usize {
        self.axes[axis].dense.len()
    }

    pub fn axis_state(&self, axis: usize, t: f64) -> Result<AxisState> {
        let ax = &self.axes[axis];
        let mut y = [0.0; 5];
        let mut dy = [0.0; 5];
        ax.dense.eval(t, &mut y, &mut dy).ok_or_else(|| {
            Error::Domain(format!(
                "t = {t} outside trajectory range [0, {}]",
                self.t_end()
            ))
        })?;
        Ok(AxisState {
            r: y[0],
            r_dot: y[1],
            re_a: y[2],
            im_a_raw: y[3],
            int_im_a: y[4],
        })
    }

    pub fn state(&self, t: f64) -> Result<GaussianState> {
        let axes = (0..self.dim())
            .map(|j| self.axis_state(j, t))
            .collect::<Result<Vec<_>>>()?;
        let a = axes
            .iter()
            .zip(&self.axes)
            .map(|(s, ax)| Complex64::new(ax.alpha / (s.r * s.r), -s.r_dot / s.r))
            .collect();
        let ln_b0 = self.init.b0.norm_sqr().ln();
        let sum_re_a: f64 = axes.iter().map(|s| s.re_a).sum();
        let sum_im_a: f64 = axes.iter().map(|s| -s.r.ln()).sum();
        let sum_int: f64 = axes.iter().map(|s| s.int_im_a).sum();
        let phase = self.lambda * t * ln_b0 + 0.5 * sum_re_a + self.lambda * sum_int;
        let b = self.init.b0 * (0.5 * sum_im_a).exp() * Complex64::from_polar(1.0, -phase);
        Ok(GaussianState {
            t,
            a,
            b,
            x0: self.init.x0.clone(),
            axes,
        })
    }

    /// `ṙ² − β₀² − α₀²(1 − 1/r²) − 4λα₀ ln r`.
    pub fn first_integral_defect(&self, axis: usize, r: f64, r_dot: f64) -> f64 {
        let ax = &self.axes[axis];
        r_dot * r_dot - first_integral_rhs(ax.alpha, ax.beta, self.lambda, r)
    }

    pub fn max_first_integral_defect(&self) -> f64 {
        (0..self.dim())
            .flat_map(|j| {
                let d = &self.axes[j].dense;
                (0..d.len()).map(move |i| {
                    let y = d.knot(i);
                    self.first_integral_defect(j, y[0], y[1]).abs()
                })
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|Im A + ln r|` over all knots.
    pub fn max_im_a_defect(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|ax| (0..ax.dense.len()).map(move |i| ax.dense.knot(i)))
            .map(|y| (y[3] + y[0].ln()).abs())
            .fold(0.0, f64::max)
    }

    pub fn lower_bound(&self, axis: usize) -> f64 {
        let ax = &self.axes[axis];
        r_lower_bound(ax.alpha, ax.beta, self.lambda)
    }

    pub fn min_r(&self, axis: usize) -> f64 {
        let d = &self.axes[axis].dense;
        (0..d.len()).map(|i| d.knot(i)[0]).fold(f64::INFINITY, f64::min)
    }

    /// `|b₀| exp(½ Σ Im A_raw) ∏ √rⱼ − |b₀|`; zero for the exact solution.
    pub fn modulus_law_defect(&self, t: f64) -> Result<f64> {
        let mut log = 0.0;
        for j in 0..self.dim() {
            let s = self.axis_state(j, t)?;
            log += 0.5 * s.im_a_raw + 0.5 * s.r.ln();
        }
        Ok(self.init.b0.norm() * (log.exp() - 1.0))
    }

    /// `‖∇u(t)‖²_{L²} = Σⱼ M (α₀ⱼ²/rⱼ² + ṙⱼ²)/(2α₀ⱼ)`.
    pub fn gradient_norm_sq(&self, t: f64) -> Result<f64> {
        let m = self.mass();
        let mut sum = 0.0;
        for (j, ax) in self.axes.iter().enumerate() {
            let s = self.axis_state(j, t)?;
            sum += m * (ax.alpha * ax.alpha / (s.r * s.r) + s.r_dot * s.r_dot) / (2.0 * ax.alpha);
        }
        Ok(sum)
    }

    /// `∫ |u|² ln |u|² = M (ln |b|² − d/2)`.
    pub fn entropy_integral(&self, t: f64) -> Result<f64> {
        let st = self.state(t)?;
        Ok(self.mass() * (st.b.norm_sqr().ln() - 0.5 * self.dim() as f64))
    }

    /// `½‖∇u‖² + λ ∫ |u|² ln |u|²`.
    pub fn energy(&self, t: f64) -> Result<f64> {
        Ok(0.5 * self.gradient_norm_sq(t)? + self.lambda * self.entropy_integral(t)?)
    }

    /// `‖u(t)‖²_{Ḣ^s}` from the Fourier side. Needs equal spectral widths on
    /// all axes unless `s = 1`.
    pub fn hs_norm_sq(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
        }
        if s == 1.0 {
            return self.gradient_norm_sq(t);
        }
        // |û(ξ)|² ∝ exp(−Σ cⱼ ξⱼ²) with cⱼ = Re(1/aⱼ)
        let mut c = Vec::with_capacity(self.dim());
        for (j, ax) in self.axes.iter().enumerate() {
            let st = self.axis_state(j, t)?;
            c.push(ax.alpha / (ax.alpha * ax.alpha / (st.r * st.r) + st.r_dot * st.r_dot));
        }
        let c0 = c[0];
        if c.iter().any(|cj| ((cj - c0) / c0).abs() > 1e-12) {
            return Err(Error::Precondition(
                "fractional Sobolev norm needs an isotropic spectrum".into(),
            ));
        }
        let half_d = 0.5 * self.dim() as f64;
        Ok(self.mass() * gamma(half_d + s) / (gamma(half_d) * c0.powf(s)))
    }

    /// Per-axis CSV: `t,r,r_dot,first_integral_defect,ReA,ImA`.
    pub fn write_axis_csv<W: Write>(&self, axis: usize, mut w: W) -> Result<()> {
        let d = &self.axes[axis].dense;
        writeln!(w, "t,r,r_dot,first_integral_defect,ReA,ImA")?;
        for i in 0..d.len() {
            let y = d.knot(i);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                d.times()[i],
                y[0],
                y[1],
                self.first_integral_defect(axis, y[0], y[1]),
                y[2],
                y[3]
            )?;
        }
        Ok(())
    }

    pub fn metadata(&self) -> GaussianMetadata {
        GaussianMetadata {
            schema_version: 1,
            init: self.init.clone(),
            lambda: self.lambda,
            rel_tol: self.rel_tol,
            t_end: self.t_end(),
            knots_per_axis: (0..self.dim()).map(|j| self.knot_count(j)).collect(),
            max_first_integral_defect: self.max_first_integral_defect(),
        }
    }
}

/// JSON sidecar for the per-axis CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMetadata {
    pub schema_version: u32,
    pub init: GaussianInit,
    pub lambda: f64,
    pub rel_tol: f64,
    pub t_end: f64,
    pub knots_per_axis: Vec<usize>,
    pub max_first_integral_defect: f64,
}

/// `a = α₀/r² − i ṙ/r`.
pub fn reconstruct_a(r: f64, r_dot: f64, alpha0: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    if !(alpha0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha0 must be positive, got {alpha0}"
        )));
    }
    Ok(Complex64::new(alpha0 / (r * r), -r_dot / r))
}

/// Samples the closed-form solution at time `t` on `grid`. The grid must hold
/// six standard deviations of `|u|²` on each side of the center.
pub fn gaussian_field(traj: &GaussianTrajectory, t: f64, grid: Grid) -> Result<WaveField> {
    if grid.dim != traj.dim() {
        return Err(Error::InvalidParameter(format!(
            "grid has d = {}, Gaussian has d = {}",
            grid.dim,
            traj.dim()
        )));
    }
    let st = traj.state(t)?;
    let mut factors = Vec::with_capacity(grid.dim);
    let mut truncated = None;
    for j in 0..grid.dim {
        let sd = 1.0 / (2.0 * st.a[j].re).sqrt();
        if st.x0[j].abs() + 6.0 * sd > grid.half_width {
            truncated = Some(format!(
                "axis {j}: center {} with standard deviation {sd:.3e} exceeds half-width {}",
                st.x0[j], grid.half_width
            ));
        }
        let a = st.a[j];
        let c = st.x0[j];
        factors.push(
            (0..grid.n)
                .map(|i| {
                    let x = grid.coord(i) - c;
                    (-0.5 * a * x * x).exp()
                })
                .collect::<Vec<_>>(),
        );
    }
    let values = (0..grid.len())
        .map(|flat| {
            let idx = grid.unravel(flat);
            (0..grid.dim).fold(st.b, |acc, j| acc * factors[j][idx[j]])
        })
        .collect();
    let field = WaveField::new(grid, values, t)?;
    if let Some(reason) = truncated {
        let m = traj.mass();
        return Err(Error::Truncation {
            mass_defect: (field.norm_sq() - m).abs() / m,
            reason,
        });
    }
    Ok(field)
}

/// `‖u(t)‖_{L^p} = (2π/p)^{d/(2p)} |b| / (∏ Re aⱼ)^{1/(2p)}`, and `|b|` for `p = ∞`.
pub fn gaussian_lp_norm(traj: &GaussianTrajectory, t: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let st = traj.state(t)?;
    let b = st.b.norm();
    if p.is_infinite() {
        return Ok(b);
    }
    let d = traj.dim() as f64;
    let prod: f64 = st.a.iter().map(|a| a.re).product();
    Ok((2.0 * PI / p).powf(d / (2.0 * p)) * b / prod.powf(1.0 / (2.0 * p)))
}

/// Leading-order growth `2t√(λα₀ ln t)` of `r`.
pub fn r_asymptotic(t: f64, lambda: f64, alpha0: f64) -> Result<f64> {
    if !(t > std::f64::consts::E) {
        return Err(Error::Domain(format!("r asymptotics need t > e, got {t}")));
    }
    if !(lambda > 0.0) || !(alpha0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda and alpha0 must be positive, got {lambda} and {alpha0}"
        )));
    }
    Ok(2.0 * t * (lambda * alpha0 * t.ln()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn initial_values() {
        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1.0, 1e-10).unwrap();
        let s = tr.axis_state(0, 0.0).unwrap();
        assert_eq!((s.r, s.r_dot), (1.0, 0.0));

        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 1.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1.0, 1e-10).unwrap();
        assert_eq!(tr.axis_state(0, 0.0).unwrap().r_dot, -1.0);
        let st = tr.state(0.0).unwrap();
        assert_eq!(st.b, c(1.0, 0.0));
        assert_eq!(st.a[0], c(1.0, 1.0));
    }

    #[test]
    fn reconstruct_a_examples() {
        assert_eq!(reconstruct_a(1.0, 0.0, 1.0).unwrap(), c(1.0, 0.0));
        assert_eq!(reconstruct_a(2.0, 0.0, 1.0).unwrap(), c(0.25, 0.0));
        assert_eq!(reconstruct_a(1.0, -1.0, 1.0).unwrap(), c(1.0, 1.0));
        assert!(matches!(reconstruct_a(0.0, 0.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_invalid_init() {
        assert!(GaussianInit::new(c(1.0, 0.0), vec![c(0.0, 1.0)], vec![0.0]).is_err());
        assert!(GaussianInit::new(c(1.0, 0.0), vec![c(1.0, 0.0)], vec![]).is_err());
        assert!(GaussianInit::new(c(1.0, 0.0), vec![], vec![]).is_err());
    }

    #[test]
    fn lp_norms() {
        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1.0, 1e-10).unwrap();
        assert!((gaussian_lp_norm(&tr, 0.0, 2.0).unwrap() - PI.powf(0.25)).abs() < 1e-15);
        assert_eq!(gaussian_lp_norm(&tr, 0.0, f64::INFINITY).unwrap(), 1.0);
        assert!(matches!(gaussian_lp_norm(&tr, 0.0, 0.5), Err(Error::Domain(_))));

        let init = GaussianInit::isotropic(2, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1.0, 1e-10).unwrap();
        assert!((gaussian_lp_norm(&tr, 0.0, 2.0).unwrap() - PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn r_asymptotic_reduces_to_tau() {
        let e2 = std::f64::consts::E.powi(2);
        assert!((r_asymptotic(e2, 1.0, 1.0).unwrap() - 2.0 * e2 * 2f64.sqrt()).abs() < 1e-12);
        let (tau, _) = crate::dispersion::tau_asymptotic(50.0, 0.7).unwrap();
        assert_eq!(r_asymptotic(50.0, 0.7, 1.0).unwrap(), tau);
    }

    #[test]
    fn unit_width_axis_outruns_tau() {
        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1e3, 1e-10).unwrap();
        let tau = crate::dispersion::solve_tau(1.0, 1e3, 1e-10).unwrap();
        for t in [0.5, 3.0, 100.0, 1e3] {
            // α₀ = 1 adds α₀²/r³ to τ̈, so r stays above τ
            assert!(tr.axis_state(0, t).unwrap().r >= tau.tau(t).unwrap());
        }
    }

    #[test]
    fn closed_form_invariants() {
        let init = GaussianInit::new(c(1.3, 0.4), vec![c(0.8, -0.3)], vec![0.2]).unwrap();
        let tr = evolve_gaussian(&init, 0.6, 200.0, 1e-10).unwrap();
        assert!(tr.max_first_integral_defect() < 1e-9);
        assert!(tr.max_im_a_defect() < 1e-8);
        assert!(tr.min_r(0) >= tr.lower_bound(0));
        let e0 = tr.energy(0.0).unwrap();
        for t in [0.1, 1.0, 10.0, 200.0] {
            assert!(((tr.energy(t).unwrap() - e0) / e0).abs() < 1e-8);
            assert!(tr.modulus_law_defect(t).unwrap().abs() < 1e-8);
        }
    }

    #[test]
    fn field_at_zero_is_initial_data() {
        let init = GaussianInit::new(c(1.0, 0.5), vec![c(1.0, 0.3)], vec![0.5]).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 1.0, 1e-10).unwrap();
        let grid = Grid::new(1, 256, 12.0).unwrap();
        let u = gaussian_field(&tr, 0.0, grid).unwrap();
        let u0 = init.field(grid).unwrap();
        assert_eq!(u.values, u0.values);
    }

    #[test]
    fn truncation_reports_mass_defect() {
        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 10.0, 1e-10).unwrap();
        let grid = Grid::new(1, 256, 3.0).unwrap();
        match gaussian_field(&tr, 10.0, grid) {
            Err(Error::Truncation { mass_defect, .. }) => assert!(mass_defect > 0.1),
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn hs_norm_matches_grid() {
        let init = GaussianInit::isotropic(1, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 5.0, 1e-10).unwrap();
        let grid = Grid::new(1, 4096, 200.0).unwrap();
        let u = gaussian_field(&tr, 5.0, grid).unwrap();
        let mut sp = crate::spectral::Spectral::new(grid);
        // |k|^{2s} is not smooth at k = 0, so fractional s converges only
        // algebraically in the frequency spacing
        for (s, tol) in [(0.25, 2e-4), (0.5, 1e-5), (1.0, 1e-10)] {
            let g = sp.homogeneous_sobolev_sq(&u.values, s);
            let exact = tr.hs_norm_sq(5.0, s).unwrap();
            assert!(((g - exact) / exact).abs() < tol, "s={s}: {g} vs {exact}");
        }
    }

    #[test]
    fn axis_csv_and_metadata() {
        let init = GaussianInit::isotropic(2, c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        let tr = evolve_gaussian(&init, 1.0, 2.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        tr.write_axis_csv(1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,r,r_dot,first_integral_defect,ReA,ImA\n"));
        assert_eq!(text.lines().count(), tr.knot_count(1) + 1);
        let json = serde_json::to_string(&tr.metadata()).unwrap();
        let back: GaussianMetadata = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tr.metadata());
    }
}
