//! Simulation and analysis of ghost imaging with thermal and super-thermal
//! speckle light.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod frame;
pub mod gi;
pub mod io;
pub mod masks;
pub mod metrology;
pub mod pipeline;
pub mod profile;
pub mod rng;
pub mod speckle;
pub mod stats;

pub use error::{Error, FormatError, Result};
pub use frame::{ArmLayout, ComplexField, Frame, FrameSource, FrameStack, LightKind, Prefix, Roi};
pub use pipeline::Parallelism;
