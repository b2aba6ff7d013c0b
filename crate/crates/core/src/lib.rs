//! Trust-cloud management for secure clustering in device-to-device
//! networks: backward/forward normal clouds, interval type-2 fuzzy trust
//! inference, a lossy-channel and radio-energy model, trust training and
//! runtime classification, a trust-aware clustering protocol and a
//! replicated round-based simulator.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The
//! simulator runs in `f64`; the aliases below name the common
//! instantiations.

pub mod cloud;
pub mod error;
pub mod inference;
pub mod medium;
pub mod protocol;
pub mod report;
pub mod runtime;
pub mod scalar;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TrustCloud = cloud::TrustCloud<f64>;
pub type DropSet = cloud::DropSet<f64>;
pub type TrustAttributes = inference::TrustAttributes<f64>;
pub type It2Fls = inference::It2Fls<f64>;
pub type EnergyParams = medium::EnergyParams<f64>;
pub type StandardClouds = training::StandardClouds<f64>;
pub type TrainingParams = training::TrainingParams<f64>;
pub type TrainingState = training::TrainingState<f64>;
pub type TrustStore = runtime::TrustStore<f64>;
pub type ClassifyParams = runtime::ClassifyParams<f64>;

pub type TrustCloudF32 = cloud::TrustCloud<f32>;
pub type DropSetF32 = cloud::DropSet<f32>;
pub type StandardCloudsF32 = training::StandardClouds<f32>;
pub type TrustStoreF32 = runtime::TrustStore<f32>;
