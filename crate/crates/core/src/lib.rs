//! Two-population vector autoregressive agent model: closed-form spectral
//! decomposition of the transition matrix, simulation, second moments and
//! the scalar cycle equation of the weighted aggregate.

pub mod cycle;
pub mod error;
pub mod model;
pub mod moments;
pub mod periodogram;
pub mod simulate;
pub mod spectral;

pub use cycle::{
    fit_constants, fit_homogeneous, forcing_term, homogeneous_solution, particular_solution, reduce_to_cycle,
    simulate_cycle, CycleModel, CycleRegime, CycleRoots, CycleSolution, HomogeneousFit, ScalarNoise,
};
pub use error::{Error, Result};
pub use model::{build_transition_matrix, validate_params, ModelParams, NoiseSpec, RawParams, TransitionMatrix};
pub use moments::{
    cross_covariance, limiting_moments, monte_carlo_cross_covariance, stationarity_diagnostic, CovarianceModel,
    CovarianceReport, LimitReport, MomentInputs,
};
pub use periodogram::{dominant_period, PeriodEstimate};
pub use simulate::{sample_noise_path, simulate_explicit, simulate_recursive, Method, NoisePath, Trajectory};
pub use spectral::{
    classify_regime, decompose, verify, EigenStructure, JordanForm, Regime, RegimeBoundaries, SpectralDecomposition,
    VerificationReport,
};
