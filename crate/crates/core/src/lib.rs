//! Secret-key and public-communication rate regions of vector Gaussian
//! sources with one-way public discussion.
//!
//! A source model is `X ~ N(0, sigma_x)` observed by Bob as
//! `Y = B X + W_y` and by Eve as `Z = E X + W_z` (general form), or with
//! `B = E = I` and arbitrary noise covariances (aligned form). Rates are in
//! nats unless a function says otherwise.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod kkt;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod rates;
pub mod region;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use model::{AlignedModel, ConditionalCov, GenEigResult, GeneralModel, Model, PerturbedPair};
pub use rates::{asymptotic_limit, rates_aligned, rates_enhanced, rates_general, RatePair};
pub use region::{contains, PointMeta, PointStatus, RegionBoundary};
pub use kkt::{certify, KktCertificate, Residuals, SourceModel};
pub use mc::{build_joint, estimate_rates, sample, MiEstimate, SampleBatch};
