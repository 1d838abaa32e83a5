//! Independent reference computations for values derived in closed form.

use std::f64::consts::PI;

use lognls_core::rescale::csiszar_kullback_bound;
use lognls_core::*;
use num_complex::Complex64;

/// Classical fourth-order Runge–Kutta for `ÿ = f(y, ẏ)` with fixed steps.
fn rk4(f: impl Fn(f64, f64) -> f64, y0: f64, v0: f64, t_end: f64, steps: usize) -> (f64, f64) {
    let h = t_end / steps as f64;
    let (mut y, mut v) = (y0, v0);
    for _ in 0..steps {
        let (k1y, k1v) = (v, f(y, v));
        let (k2y, k2v) = (v + 0.5 * h * k1v, f(y + 0.5 * h * k1y, v + 0.5 * h * k1v));
        let (k3y, k3v) = (v + 0.5 * h * k2v, f(y + 0.5 * h * k2y, v + 0.5 * h * k2v));
        let (k4y, k4v) = (v + h * k3v, f(y + h * k3y, v + h * k3v));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    (y, v)
}

#[test]
fn tau_at_ten_matches_rk4() {
    for lambda in [0.5, 1.0, 2.0] {
        let (tau, tau_dot) = rk4(|y, _| 2.0 * lambda / y, 1.0, 0.0, 10.0, 200_000);
        let traj = solve_tau(lambda, 10.0, 1e-10).unwrap();
        let (got, got_dot) = traj.eval(10.0).unwrap();
        assert!((got / tau - 1.0).abs() < 1e-9, "λ = {lambda}: {got} vs {tau}");
        assert!((got_dot / tau_dot - 1.0).abs() < 1e-9);
    }
}

#[test]
fn gaussian_width_at_hundred_matches_rk4() {
    let (alpha, lambda) = (1.0, 1.0);
    let f = |r: f64, _| alpha * alpha / (r * r * r) + 2.0 * lambda * alpha / r;
    let (r, r_dot) = rk4(f, 1.0, 0.0, 100.0, 1_000_000);
    let init = GaussianInit::isotropic(1, Complex64::new(1.0, 0.0), Complex64::new(alpha, 0.0))
        .unwrap();
    let traj = evolve_gaussian(&init, lambda, 100.0, 1e-10).unwrap();
    let st = traj.axis_state(0, 100.0).unwrap();
    assert!((st.r / r - 1.0).abs() < 1e-8, "{} vs {r}", st.r);
    assert!((st.r_dot / r_dot - 1.0).abs() < 1e-8);
}

#[test]
fn relative_entropy_of_shifted_gamma_sq() {
    let grid = Grid::new(1, 1024, 16.0).unwrap();
    let rho = DensityProfile::from_fn(grid, |y| (-(y[0] - 0.5).powi(2)).exp()).unwrap();
    let h = relative_entropy(&rho).unwrap();
    assert!((h - PI.sqrt() * 0.25).abs() < 1e-10, "{h}");
    assert!(csiszar_kullback_bound(&rho).unwrap() <= h);
}

#[test]
fn wasserstein_between_translates_is_the_shift() {
    let grid = Grid::new(1, 4096, 16.0).unwrap();
    let gamma = DensityProfile::gamma_sq(grid);
    for shift in [0.1, 0.5, 1.5] {
        let rho = DensityProfile::from_fn(grid, |y| (-(y[0] - shift).powi(2)).exp()).unwrap();
        let w2 = wasserstein2_1d(&rho, &gamma).unwrap();
        assert!((w2 - shift).abs() < 1e-3, "shift {shift}: {w2}");
    }
}

#[test]
fn sobolev_norms_of_evolved_gaussian_match_closed_form() {
    let init =
        GaussianInit::isotropic(1, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
    let traj = evolve_gaussian(&init, 1.0, 5.0, 1e-12).unwrap();
    let grid = Grid::new(1, 1 << 16, 800.0).unwrap();
    let u = gaussian_field(&traj, 5.0, grid).unwrap();
    // the grid sum misses part of the |ξ|^{2s} cusp at the origin when s < 1
    for (s, tol) in [(0.25, 1e-5), (0.5, 1e-5), (0.75, 1e-5), (1.0, 1e-8)] {
        let want = traj.hs_norm_sq(5.0, s).unwrap().sqrt();
        let got = sobolev_norm(&u, s).unwrap();
        assert!((got / want - 1.0).abs() < tol, "s = {s}: {got} vs {want}");
    }
}

#[test]
fn comoving_run_reproduces_closed_form_profile() {
    let init =
        GaussianInit::isotropic(1, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap();
    let t_end = 20.0;
    let gt = evolve_gaussian(&init, 1.0, t_end, 1e-12).unwrap();
    let traj = solve_tau(1.0, t_end, 1e-12).unwrap();
    let grid = Grid::new(1, 512, 20.0).unwrap();
    let schedule = lognls_core::pde::LogStepSchedule {
        dt_min: 1e-3,
        fraction: 1e-3,
        dt_max: 0.1,
    };
    let out = run_comoving(
        &init.field(grid).unwrap(),
        &ModelParams::logarithmic(1.0),
        &traj,
        t_end,
        &schedule,
        &[],
        &Default::default(),
    )
    .unwrap();
    let u = from_v(&out.final_profile, &traj, init.mass().sqrt()).unwrap();
    let exact = gaussian_field(&gt, t_end, u.grid).unwrap();
    let rel = u.distance(&exact).unwrap() / exact.norm();
    assert!(rel < 1e-4, "{rel}");
}
