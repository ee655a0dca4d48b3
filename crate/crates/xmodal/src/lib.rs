//! Cross-modal anomaly detection toolkit.
//!
//! Two data modalities describing the same instances are mapped by a pair of
//! encoders into a shared consensus space where agreement is measured by
//! cosine similarity. Training pulls consistent pairs together and pushes
//! label-mismatched pairs below a margin; detection flags test pairs whose
//! similarity falls under a threshold. Classical CCA/PLS projections are
//! provided as baselines behind the same scoring interface.
//!
//! All numeric routines are generic over the scalar type; the shipped
//! pipelines use the [`Real`] (`f64`) aliases below.

// `!(x >= 0)` in validators is deliberate: it rejects NaN where `x < 0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops in the numeric kernels mirror the row/column arithmetic they implement.
#![allow(clippy::needless_range_loop)]

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};

pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod data;
pub mod detection;
pub mod encoders;
mod error;
mod iofmt;
pub mod numerics;
pub mod objective;
pub mod training;

pub use error::{Error, Result};

/// Floating-point scalar underlying every numeric routine: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + FromStr + std::iter::Sum + Send + Sync + 'static
{
    /// Convert an `f64` constant into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Scalar used by the command-line pipelines. Double precision: the
/// finite-difference gradient checks that anchor the test suite need it.
pub type Real = f64;
/// Dense matrix over [`Real`].
pub type Mat = numerics::Matrix<Real>;
