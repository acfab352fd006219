//! Expectation fields of Wiener-shifted flows, their fluctuations and
//! Reynolds stress, and residual diagnostics for the Burgers, Reynolds and
//! Navier–Stokes relations.

mod mc;
mod second_derivative;
mod report;
mod residual;
mod smoothing;
mod stress;

pub use mc::McField;
pub(crate) use mc::{mc_moments, mean_spectra, Moments};
pub use second_derivative::projected_backward_second_derivative;
pub use report::{parse_grid, Orientation, ResidualRecord, ResidualReport, COLUMNS, REPORT_TAG};
pub use residual::{
    burgers_residual, ito_transport_check, ns_linearized, ns_residual, ns_residual_field,
    reynolds_residual, reynolds_residual_fields, uniform_step, ReynoldsForm, ReynoldsSample,
};
pub use smoothing::{
    fluctuation_field, heat_smooth, mc_smooth, smooth_by_expectation, smooth_scalar, Construction,
    MeanFieldSeries, Smoothing,
};
pub use stress::{
    decompose_expected_advection, reynolds_stress, reynolds_stress_ensemble, AdvectionDecomposition,
};
