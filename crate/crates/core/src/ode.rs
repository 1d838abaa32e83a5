//! Adaptive Dormand–Prince 5(4) integration with quintic Hermite dense output.
//!
//! Systems supply their right-hand side and its total time derivative, so every
//! accepted knot stores `(y, y', y'')`. Interpolation between knots is the
//! quintic Hermite polynomial matching all three, which is accurate to fifth
//! order in the step and needs no extra stage evaluations.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Second time derivative `d/dt f(t, y(t))` given `y` and `dy = f(t, y)`.
    fn rhs_dot(&self, t: f64, y: &[f64], dy: &[f64], ddy: &mut [f64]);

    /// Restores a known invariant at a block boundary. Returns the magnitude of
    /// the correction applied (0 when nothing was changed).
    fn project(&self, _t: f64, _y: &mut [f64]) -> f64 {
        0.0
    }

    /// Physical admissibility of an accepted state; `Some(reason)` aborts.
    fn check(&self, _t: f64, _y: &[f64]) -> Option<String> {
        None
    }
}

/// A drift correction applied at a block boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub t: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Largest admissible projection correction; larger ones are reported as a
    /// convergence failure instead of being applied.
    pub max_correction: Option<f64>,
    /// Upper bound on the step relative to `max(1, |t|)`.
    pub max_relative_step: f64,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 5_000_000,
            max_correction: None,
            max_relative_step: 0.05,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

impl Dopri5 {
    /// Integrates from `t0` to `t_end`, landing exactly on every entry of
    /// `block_ends` inside `(t0, t_end)` and projecting there.
    pub fn integrate<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        block_ends: &[f64],
    ) -> Result<(DenseTrajectory, Vec<Correction>)> {
        let n = sys.dim();
        if y0.len() != n {
            return Err(Error::InvalidParameter(format!(
                "initial state has {} components, system has {n}",
                y0.len()
            )));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {t_end} must exceed t0 = {t0}"
            )));
        }

        let mut stops: Vec<f64> = block_ends
            .iter()
            .copied()
            .filter(|&b| b > t0 && b < t_end)
            .collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        stops.push(t_end);

        let mut traj = DenseTrajectory::new(n);
        let mut corrections = Vec::new();

        let mut t = t0;
        let mut y = y0.to_vec();
        let mut k1 = vec![0.0; n];
        let mut dd = vec![0.0; n];
        sys.rhs(t, &y, &mut k1);
        sys.rhs_dot(t, &y, &k1, &mut dd);
        traj.push(t, &y, &k1, &dd);

        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];

        let mut h = (1e-4 * (t_end - t0)).clamp(1e-12, 1e-3);
        let mut steps = 0usize;

        for &stop in &stops {
            while t < stop {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::ConvergenceFailure {
                        t,
                        reason: format!("exceeded {} steps", self.max_steps),
                    });
                }
                let h_cap = self.max_relative_step * t.abs().max(1.0);
                h = h.min(h_cap);
                let mut last = false;
                if t + h >= stop || stop - (t + h) < 1e-12 * stop.abs().max(1.0) {
                    h = stop - t;
                    last = true;
                }
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::ConvergenceFailure {
                        t,
                        reason: format!("step size underflow (h = {h:e})"),
                    });
                }

                for i in 0..n {
                    ytmp[i] = y[i] + h * A21 * k1[i];
                }
                sys.rhs(t + C2 * h, &ytmp, &mut k2);
                for i in 0..n {
                    ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
                }
                sys.rhs(t + C3 * h, &ytmp, &mut k3);
                for i in 0..n {
                    ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                sys.rhs(t + C4 * h, &ytmp, &mut k4);
                for i in 0..n {
                    ytmp[i] =
                        y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                sys.rhs(t + C5 * h, &ytmp, &mut k5);
                for i in 0..n {
                    ytmp[i] = y[i]
                        + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i]
                            + A65 * k5[i]);
                }
                sys.rhs(t + h, &ytmp, &mut k6);
                for i in 0..n {
                    ynew[i] = y[i]
                        + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                sys.rhs(t + h, &ynew, &mut k7);

                let mut err = 0.0;
                for i in 0..n {
                    let e = h
                        * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                            + E7 * k7[i]);
                    let sc = self.atol + self.rtol * y[i].abs().max(ynew[i].abs());
                    err += (e / sc).powi(2);
                }
                let err = (err / n as f64).sqrt();

                if !err.is_finite() {
                    h *= 0.1;
                    continue;
                }
                if err <= 1.0 {
                    t = if last { stop } else { t + h };
                    std::mem::swap(&mut y, &mut ynew);
                    std::mem::swap(&mut k1, &mut k7);
                    if let Some(reason) = sys.check(t, &y) {
                        return Err(Error::IntegratorFault { t, reason });
                    }
                    if last && stop < t_end {
                        let magnitude = sys.project(t, &mut y);
                        if let Some(max) = self.max_correction {
                            if magnitude > max {
                                return Err(Error::ConvergenceFailure {
                                    t,
                                    reason: format!(
                                        "drift correction {magnitude:e} exceeds {max:e}"
                                    ),
                                });
                            }
                        }
                        if magnitude > 0.0 {
                            sys.rhs(t, &y, &mut k1);
                        }
                        corrections.push(Correction { t, magnitude });
                    }
                    sys.rhs_dot(t, &y, &k1, &mut dd);
                    traj.push(t, &y, &k1, &dd);
                    let fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
                    if !last {
                        h *= fac.clamp(0.2, 5.0);
                    }
                } else {
                    let fac = 0.9 * err.powf(-0.2);
                    h *= fac.clamp(0.1, 0.9);
                }
            }
        }
        Ok((traj, corrections))
    }
}

/// Knots `(t, y, y', y'')` with quintic Hermite interpolation in between.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    dim: usize,
    ts: Vec<f64>,
    ys: Vec<f64>,
    dys: Vec<f64>,
    ddys: Vec<f64>,
}

impl DenseTrajectory {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            ts: Vec::new(),
            ys: Vec::new(),
            dys: Vec::new(),
            ddys: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, y: &[f64], dy: &[f64], ddy: &[f64]) {
        self.ts.push(t);
        self.ys.extend_from_slice(y);
        self.dys.extend_from_slice(dy);
        self.ddys.extend_from_slice(ddy);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn knot(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn knot_derivative(&self, i: usize) -> &[f64] {
        &self.dys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contains(&self, t: f64) -> bool {
        !self.ts.is_empty() && t >= self.t_start() && t <= self.t_end()
    }

    /// State and first derivative at `t`; `None` outside the covered span.
    pub fn eval(&self, t: f64, y: &mut [f64], dy: &mut [f64]) -> Option<()> {
        if !self.contains(t) {
            return None;
        }
        let i = self.ts.partition_point(|&s| s <= t).saturating_sub(1);
        if i + 1 >= self.ts.len() {
            let d = self.dim;
            let last = self.ts.len() - 1;
            y.copy_from_slice(&self.ys[last * d..(last + 1) * d]);
            dy.copy_from_slice(&self.dys[last * d..(last + 1) * d]);
            return Some(());
        }
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let th = (t - t0) / h;
        let w = hermite5(th);
        let dw = hermite5_derivative(th);
        let d = self.dim;
        for c in 0..d {
            let a = i * d + c;
            let b = (i + 1) * d + c;
            let (y0, y1) = (self.ys[a], self.ys[b]);
            let (p0, p1) = (self.dys[a] * h, self.dys[b] * h);
            let (q0, q1) = (self.ddys[a] * h * h, self.ddys[b] * h * h);
            y[c] = w[0] * y0 + w[1] * p0 + w[2] * q0 + w[3] * q1 + w[4] * p1 + w[5] * y1;
            dy[c] = (dw[0] * y0 + dw[1] * p0 + dw[2] * q0 + dw[3] * q1 + dw[4] * p1
                + dw[5] * y1)
                / h;
        }
        Some(())
    }
}

/// Quintic Hermite basis on [0, 1], ordered as weights for
/// `y0, h y0', h² y0'', h² y1'', h y1', y1`.
fn hermite5(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
        0.5 * t3 - t4 + 0.5 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
    ]
}

fn hermite5_derivative(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
        1.5 * t2 - 4.0 * t3 + 2.5 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
        fn rhs_dot(&self, _t: f64, _y: &[f64], dy: &[f64], ddy: &mut [f64]) {
            ddy[0] = dy[1];
            ddy[1] = -dy[0];
        }
    }

    #[test]
    fn hermite_reproduces_quintics() {
        // p(t) = 1 + 2t - t^2 + 3t^3 - 2t^4 + t^5 on [0, 1]
        let p = |t: f64| 1.0 + 2.0 * t - t * t + 3.0 * t.powi(3) - 2.0 * t.powi(4) + t.powi(5);
        let dp = |t: f64| 2.0 - 2.0 * t + 9.0 * t * t - 8.0 * t.powi(3) + 5.0 * t.powi(4);
        let ddp = |t: f64| -2.0 + 18.0 * t - 24.0 * t * t + 20.0 * t.powi(3);
        for &s in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let w = hermite5(s);
            let v = w[0] * p(0.0) + w[1] * dp(0.0) + w[2] * ddp(0.0) + w[3] * ddp(1.0)
                + w[4] * dp(1.0)
                + w[5] * p(1.0);
            assert!((v - p(s)).abs() < 1e-13, "{s}: {v} vs {}", p(s));
            let dw = hermite5_derivative(s);
            let dv = dw[0] * p(0.0) + dw[1] * dp(0.0) + dw[2] * ddp(0.0) + dw[3] * ddp(1.0)
                + dw[4] * dp(1.0)
                + dw[5] * p(1.0);
            assert!((dv - dp(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillator_dense_output_is_accurate() {
        let solver = Dopri5::new(1e-11, 1e-13);
        let (traj, _) = solver
            .integrate(&Oscillator, 0.0, &[1.0, 0.0], 20.0, &[])
            .unwrap();
        let mut y = [0.0; 2];
        let mut dy = [0.0; 2];
        for k in 0..=200 {
            let t = 0.1 * k as f64;
            traj.eval(t, &mut y, &mut dy).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-8, "t = {t}");
            assert!((y[1] + t.sin()).abs() < 1e-8);
            assert!((dy[0] + t.sin()).abs() < 1e-8);
        }
        assert!(traj.eval(20.5, &mut y, &mut dy).is_none());
    }

    #[test]
    fn lands_on_block_boundaries() {
        let solver = Dopri5::new(1e-8, 1e-10);
        let (traj, corr) = solver
            .integrate(&Oscillator, 0.0, &[1.0, 0.0], 3.0, &[1.0, 2.0, 7.0])
            .unwrap();
        assert!(traj.times().contains(&1.0));
        assert!(traj.times().contains(&2.0));
        assert_eq!(corr.len(), 2);
        assert_eq!(traj.t_end(), 3.0);
    }

    #[test]
    fn rejects_backwards_span() {
        let solver = Dopri5::new(1e-8, 1e-10);
        assert!(solver.integrate(&Oscillator, 1.0, &[1.0, 0.0], 0.5, &[]).is_err());
    }
}
