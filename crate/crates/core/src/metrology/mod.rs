//! Figures of merit of reconstructed images and the sweep experiments.

mod fom;
mod resolution;
mod sweep;

pub use fom::{contrast, snr, visibility, FiguresOfMerit, FomRow, RegionPair, MIN_OUT_PIXELS};
pub use resolution::{resolution_r, smooth3, Resolution, SectionProfile, MIN_SECTION_LEN};
pub use sweep::{spearman_rho, sweep_frame_count, sweep_object_size, SweepSetup};
