//! Pulse-level simulation and characterization of single-loop holonomic gates
//! on transmon qutrits and cavity Fock states.
//!
//! The physics core is generic over the scalar type; the analysis modules
//! (tomography, benchmarking, calibration, sweeps, lsq) work in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod benchmarking;
pub mod calibration;
pub mod error;
pub mod evolution;
pub mod holonomic;
pub mod lsq;
pub mod model;
pub mod operators;
pub mod pulses;
pub mod scalar;
pub mod sweeps;
pub mod tomography;

pub use error::{Error, Result};

pub type ComplexMatrix64 = operators::ComplexMatrix<f64>;
pub type ComplexMatrix32 = operators::ComplexMatrix<f32>;
pub type DensityMatrix64 = operators::DensityMatrix<f64>;
pub type DensityMatrix32 = operators::DensityMatrix<f32>;
pub type HolonomicParams64 = holonomic::HolonomicParams<f64>;
pub type HolonomicParams32 = holonomic::HolonomicParams<f32>;
pub type GateSchedule64 = holonomic::GateSchedule<f64>;
pub type GateSchedule32 = holonomic::GateSchedule<f32>;
pub type Envelope64 = pulses::Envelope<f64>;
pub type Envelope32 = pulses::Envelope<f32>;
pub type NoiseModel64 = model::NoiseModel<f64>;
pub type NoiseModel32 = model::NoiseModel<f32>;
pub type DeviceParameters64 = model::DeviceParameters<f64>;
pub type Superoperator64 = evolution::Superoperator<f64>;
