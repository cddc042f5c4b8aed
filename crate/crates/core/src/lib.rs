//! Macrospin MTJ simulation engine.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod codegen;
pub mod conduction;
pub mod config;
pub mod constants;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod solvers;
pub mod state;
pub mod vec3;

pub use constants::{PhysicalConstants, CODATA_2018};
pub use device::{derive, DerivedQuantities, DeviceParams};
pub use error::{MtjError, Result};
pub use state::{state_from_cartesian, wrap_phi, MagState};
pub use vec3::Vec3;
