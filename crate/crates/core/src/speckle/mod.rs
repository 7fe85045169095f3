//! Pseudo-thermal and super-thermal speckle generation.

pub mod compound;
pub mod config;
pub mod generator;
pub mod physical;
pub mod pinhole;
pub mod thermal;

pub use config::{Backend, SimConfig};
pub use generator::{gen_stack, SimulatedStack, SpeckleSimulator};
pub use pinhole::{select_pinhole, Pinhole};
pub use thermal::SpeckleKernel;

use rand::Rng;

use crate::error::Result;
use crate::frame::ComplexField;

/// A thermal field with the configured speckle size and mean intensity.
pub fn gen_thermal_field<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<ComplexField> {
    config.validate()?;
    let kernel = SpeckleKernel::for_fwhm(config.grid_width, config.grid_height, config.target_speckle_fwhm)?;
    Ok(kernel.draw_field(rng, config.mean_intensity))
}
