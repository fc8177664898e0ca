//! Desk-scale laboratory contrasting MSE regression with denoising diffusion
//! on controlled multimodal conditional distributions.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the bottom of this file fix the scalar to `f64`, which is what the
//! experiments, the CLI and the acceptance suite use.

pub mod diffusion;
pub mod error;
pub mod eval;
pub mod lab;
pub mod nets;
pub mod prosody;
pub mod scaling;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type NoiseSchedule = diffusion::NoiseSchedule<f64>;
pub type SamplerConfig = diffusion::SamplerConfig<f64>;
pub type NetParams = nets::NetParams<f64>;
pub type TrainConfig = nets::TrainConfig<f64>;
pub type Contour = prosody::Contour<f64>;
pub type CwtMatrix = prosody::CwtMatrix<f64>;
pub type ScalingPoint = scaling::ScalingPoint<f64>;
pub type ScalingFit = scaling::ScalingFit<f64>;
