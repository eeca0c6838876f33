//! Simulator for individually addressing trapped-ion qubits with a
//! MEMS-steered Raman beam.
//!
//! The single-qubit algebra and the beam optics are generic over the float
//! type; the aliases below fix them to `f64` or `f32`. Everything from the
//! mirror model upward works in `f64`.
//!
//! ```
//! use ionsim::{relative_intensity, AddressingBeam64, Point2_64};
//!
//! let beam = AddressingBeam64::new(Point2_64::origin(), 3.3, 13.0, 0.0).unwrap();
//! let i = relative_intensity(&beam, &Point2_64::new(7.4, 0.0));
//! assert!((i - 4.2886e-5).abs() < 1e-8);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod mems;
pub mod optics;
pub mod qmath;
pub mod rng;
pub mod scalar;
pub mod sequencer;
pub mod tomo;

pub use error::{Error, Result};
pub use optics::{crosstalk_from_populations, estimate_waist, local_pi_time, relative_intensity};
pub use qmath::{fidelity_pure, rotation_gate};
pub use scalar::Real;

pub type PureState64 = qmath::PureState<f64>;
pub type PureState32 = qmath::PureState<f32>;
pub type BlochVector64 = qmath::BlochVector<f64>;
pub type BlochVector32 = qmath::BlochVector<f32>;
pub type DensityMatrix64 = qmath::DensityMatrix<f64>;
pub type DensityMatrix32 = qmath::DensityMatrix<f32>;
pub type Unitary64 = qmath::Unitary2<f64>;
pub type Unitary32 = qmath::Unitary2<f32>;
#[allow(non_camel_case_types)]
pub type Point2_64 = optics::Point2<f64>;
#[allow(non_camel_case_types)]
pub type Point2_32 = optics::Point2<f32>;
pub type IonChain64 = optics::IonChain<f64>;
pub type IonChain32 = optics::IonChain<f32>;
pub type AddressingBeam64 = optics::AddressingBeam<f64>;
pub type AddressingBeam32 = optics::AddressingBeam<f32>;
pub type SteeringGeometry64 = optics::SteeringGeometry<f64>;
pub type SteeringGeometry32 = optics::SteeringGeometry<f32>;
