#![doc = include_str!("../../../README.md")]

pub mod error;
pub mod fit;
pub mod impute;
pub mod io;
pub mod linalg;
pub mod network;
pub mod num;
pub mod pipeline;
pub mod pool;
pub mod rng;
pub mod sim;
pub mod terms;

pub use error::{Error, Result};
pub use fit::{brute_force_mle, filter_fits, fit_exact, fit_mple, Estimator, FilterOptions, FitOptions, FitResult};
pub use network::{describe, derive_composite_skills, derive_perceived_skills, Attribute, AttributeTable, DirectedNetwork};
pub use num::{Real, Scalar};
pub use pool::{fixed_effect_reference, pool, EffectObservation, PoolConfig, PosteriorSummary};
pub use sim::{gof, generate_attributes, sample_exact, sample_metropolis, SimConfig};
pub use terms::{change_stats, dyad_predictors, sufficient_stats, ModelSpec, Preset, TermKind};

/// Double-precision aliases used by the pipeline and CLI.
pub type Fit = FitResult<f64>;
pub type Observation = EffectObservation<f64>;
pub type Posterior = PosteriorSummary<f64>;
pub type Simulation = SimConfig<f64>;
