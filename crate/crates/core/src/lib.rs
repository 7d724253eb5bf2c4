#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expfam;
pub mod fragments;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod quadrature;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instances of the scalar-generic types.
pub type Message = expfam::NatParam<f64>;
pub type Moments = expfam::MomentVector<f64>;
pub type Matrix = linalg::Mat<f64>;
pub type Fragment = fragments::FragmentData<f64>;
pub type Graph = graph::FactorGraph<f64>;
pub type Config = graph::EpConfig<f64>;
pub type Fit = graph::FitResult<f64>;
pub type Quad = quadrature::QuadConfig<f64>;
