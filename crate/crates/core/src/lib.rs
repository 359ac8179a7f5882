//! Curriculum-ordered training of quantum convolutional phase classifiers.
//!
//! The numerical substrate ([`pauli`], [`state`], [`dense`], [`circuit`],
//! [`lie`]) is generic over the scalar type through [`Real`]; the aliases at
//! the crate root pin the `f64` instantiation used by the experiment layers.

pub mod circuit;
pub mod curriculum;
pub mod dense;
pub mod error;
pub mod io;
pub mod lie;
pub mod models;
pub mod pauli;
pub mod qcnn;
pub mod scalar;
pub mod state;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString};
pub use scalar::{EigenReal, Real};

pub type Complex64 = num_complex::Complex<f64>;

pub type PauliTerm = pauli::PauliTerm<f64>;
pub type OperatorSum = pauli::OperatorSum<f64>;
pub type StateVector = state::StateVector<f64>;
pub type GroundState = dense::GroundState<f64>;

pub type PauliTerm32 = pauli::PauliTerm<f32>;
pub type OperatorSum32 = pauli::OperatorSum<f32>;
pub type StateVector32 = state::StateVector<f32>;
