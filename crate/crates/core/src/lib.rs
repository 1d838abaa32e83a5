//! Solvers and diagnostics for the logarithmic Schrödinger equation
//!
//! ```text
//! i ∂ₜu + ½Δu = λ ln(|u|²) u
//! ```
//!
//! and its power-perturbed variant: the universal dispersion `τ(t)`, exact
//! Gaussian solutions, a split-step pseudospectral solver, the rescaled profile
//! with its entropy/moment/transport diagnostics, and the limiting
//! Fokker–Planck dynamics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comoving;
pub mod dispersion;
pub mod error;
pub mod field;
pub mod fokker_planck;
pub mod gaussian;
pub mod ode;
pub mod pde;
pub mod rescale;
pub mod spectral;

pub use comoving::{physical_record, run_comoving, ComovingRunOutput};
pub use dispersion::{ell, s_of_t, solve_tau, tau_asymptotic, TauTrajectory};
pub use error::{Error, Result};
pub use field::{DensityProfile, Grid, WaveField};
pub use fokker_planck::{apply_l, fp_compare, fp_solve, hydro_fields, FpReport, HydroFields};
pub use gaussian::{
    evolve_gaussian, gaussian_field, gaussian_lp_norm, r_asymptotic, reconstruct_a,
    GaussianInit, GaussianState, GaussianTrajectory,
};
pub use pde::{
    energy, energy_reg, log_inequality_check, mass, momentum, run, step_strang, ModelParams,
};
pub use rescale::{
    diagnose, from_v, momentum_pair, moments, pseudo_energy, relative_entropy, sobolev_norm, to_v,
    wasserstein2_1d, DiagnosticsRecord,
};
