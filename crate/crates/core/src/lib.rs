//! Forward simulation and onset retrodiction for a photolyase–DNA binding
//! assay.
//!
//! * [`kinetics`]: second-order and pseudo-first-order binding curves, an
//!   RK4 oracle and a Gillespie simulator.
//! * [`photon_budget`]: absorbance, absorbed fraction and the photon count
//!   needed to convert every dimer site.
//! * [`assay`]: aliquot withdrawal, gel separation and Poisson band counts.
//! * [`retrodict`]: closed-form and least-squares estimates of `t0` with
//!   linearized and bootstrap intervals.
//! * [`io`]: CSV formats for trajectories and measurements.

pub mod assay;
pub mod error;
pub mod io;
pub mod kinetics;
mod lsq;
pub mod photon_budget;
pub mod retrodict;
pub mod seed;

pub use assay::{
    expected_counts, ps_from_counts, run_assay, schedule_withdrawals, simulate_counts,
    AliquotMeasurement, AssayProtocol,
};
pub use error::{Error, IterationRecord, Result};
pub use kinetics::{
    gillespie_simulate, half_life_pseudo_first, integrate_ode, ps_pseudo_first_order,
    ps_second_order_exact, KineticModel, KineticsSample, ReactionParams, StochasticTrajectory,
    AVOGADRO,
};
pub use photon_budget::{
    absorbance, conversion_fraction, dimer_sites, fraction_absorbed, required_photons,
    uv_pulse_from_gamma, OpticalParams, PhotonBudgetInput, PhotonBudgetReport,
};
pub use retrodict::{
    bootstrap_ci, fit_pseudo_first, fit_pseudo_first_with, fit_second_order,
    fit_second_order_with, two_point_estimate, BootstrapSummary, CountingNoise, FitOptions,
    FittedRates, ParamInterval, RetrodictionResult, Weighting,
};
