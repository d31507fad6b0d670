//! Scattering-network models, effective reflection mode extraction and
//! lineshape fitting for hanger-coupled microwave resonators.
//!
//! The network algebra is generic over [`Real`] (f32 or f64); the data
//! pipeline, fitting, synthesis and file formats work in f64.

pub mod circle;
pub mod dataio;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod models;
pub mod netcore;
pub mod perturb;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tee;

pub use error::{Error, Result};
pub use netcore::{FrequencySweep, ScatteringMatrix};
pub use scalar::Real;

/// Double-precision aliases.
pub type ScatteringMatrix64 = netcore::ScatteringMatrix<f64>;
pub type FrequencySweep64 = netcore::FrequencySweep<f64>;
pub type ResonatorParams64 = models::ResonatorParams<f64>;
pub type HangerParams64 = models::HangerParams<f64>;
pub type TeeJunction64 = tee::TeeJunction<f64>;
pub type TeeEigenphases64 = tee::TeeEigenphases<f64>;
pub type PerturbationGenerator64 = perturb::PerturbationGenerator<f64>;

/// Single-precision aliases.
pub type ScatteringMatrix32 = netcore::ScatteringMatrix<f32>;
pub type FrequencySweep32 = netcore::FrequencySweep<f32>;
pub type ResonatorParams32 = models::ResonatorParams<f32>;
pub type HangerParams32 = models::HangerParams<f32>;
pub type TeeJunction32 = tee::TeeJunction<f32>;
pub type TeeEigenphases32 = tee::TeeEigenphases<f32>;
pub type PerturbationGenerator32 = perturb::PerturbationGenerator<f32>;
