//! Brownian ensembles, additive-noise diffusions, Nelson mean-derivative
//! estimators and the Wiener-shifted, time-reversed flow.

mod diffusion;
mod mean_derivative;
mod perturbed;
mod wiener;

pub use diffusion::{sample_diffusion, uniform_torus_points, DiffusionPathSet, Drift};
pub use mean_derivative::{
    estimate_mean_derivative, field_evaluator, ito_prediction, mean_derivative_of_field, regress,
    BinRange, Conditioning, Direction, Estimate, MeanDerivative, Regression, RegressionBin,
    MIN_BIN_SAMPLES,
};
pub use perturbed::{build_perturbed_flow, BaseFlow, EulerFlowMaps, PerturbedFlow};
pub use wiener::{sample_wiener, EnsembleMeta, WienerDiagnostics, WienerEnsemble};
