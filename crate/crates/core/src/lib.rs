//! Transitory queues: the Δ_(i)/G/1 model, its fluid and diffusion limits,
//! closed-form transient laws, tail asymptotics, large deviations and the
//! periodic extension.

// `!(x > 0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ldp;
pub mod limits;
pub mod mc;
pub mod optimize;
pub mod path;
pub mod periodic;
pub mod quadrature;
pub mod queue;
pub mod rng;
pub mod scalar;
pub mod scatter;
pub mod service;
pub mod special;
pub mod tail;
pub mod transient;
pub mod validation;

pub use error::{Error, Result};
pub use path::{EmpiricalCdf, GridPath, GridSpec};
pub use mc::{Estimate, Moments, Replicator};
pub use rng::RandomStream;
pub use scalar::Real;
pub use scatter::{Perturbation, ScatterModel};
pub use service::{ServiceModel, ServiceMoments};

pub use ldp::LdpProblem;
pub use periodic::PeriodicGaussParams;
pub use tail::TailProblem;
pub use transient::ReflectedLawParams;

pub type ServiceModelF64 = ServiceModel<f64>;
pub type ServiceModelF32 = ServiceModel<f32>;
pub type ServiceMomentsF64 = ServiceMoments<f64>;
pub type ServiceMomentsF32 = ServiceMoments<f32>;
pub type ScatterModelF64 = ScatterModel<f64>;
pub type ScatterModelF32 = ScatterModel<f32>;
pub type GridPathF64 = GridPath<f64>;
pub type GridPathF32 = GridPath<f32>;
pub type ReflectedLawParamsF64 = ReflectedLawParams<f64>;
pub type ReflectedLawParamsF32 = ReflectedLawParams<f32>;
pub type TailProblemF64 = TailProblem<f64>;
pub type TailProblemF32 = TailProblem<f32>;
pub type LdpProblemF64 = LdpProblem<f64>;
pub type LdpProblemF32 = LdpProblem<f32>;
pub type PeriodicGaussParamsF64 = PeriodicGaussParams<f64>;
pub type PeriodicGaussParamsF32 = PeriodicGaussParams<f32>;
