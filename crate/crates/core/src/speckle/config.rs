use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which generator produces super-thermal frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Pinhole-filtered speckle field scattered by discrete centres onto a virtual CCD.
    Physical,
    /// Gamma-distributed frame brightness times an independent thermal frame.
    Compound,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "physical" => Ok(Backend::Physical),
            "compound" => Ok(Backend::Compound),
            other => Err(Error::Config(format!("unknown backend `{other}`"))),
        }
    }
}

/// Simulation parameters. Lengths share one unit (micrometres by default).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    /// FWHM of the intensity autocorrelation peak on the camera, in pixels.
    pub target_speckle_fwhm: f64,
    pub n_scatterers: usize,
    pub wavelength_vacuum: f64,
    pub diffuser_thickness: f64,
    pub refractive_index: f64,
    pub disk_to_ccd_distance: f64,
    /// Camera pixel pitch, in length units.
    pub pixel_pitch: f64,
    /// Speckle FWHM of the first-stage field in front of the pinhole, in pixels.
    pub first_stage_speckle_fwhm: f64,
    /// Target number of modes passed by the pinhole. May be `inf`.
    pub pinhole_mode_count: f64,
    pub mean_intensity: f64,
    pub backend: Backend,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_width: 200,
            grid_height: 200,
            target_speckle_fwhm: 3.5,
            n_scatterers: 100,
            wavelength_vacuum: 0.523,
            diffuser_thickness: 2000.0,
            refractive_index: 1.5,
            disk_to_ccd_distance: 100_000.0,
            pixel_pitch: 4.65,
            first_stage_speckle_fwhm: 16.0,
            pinhole_mode_count: 1.06,
            mean_intensity: 1.0,
            backend: Backend::Compound,
        }
    }
}

impl SimConfig {
    /// Desk-scale preset: 128x128 grid.
    pub fn desk() -> Self {
        SimConfig {
            grid_width: 128,
            grid_height: 128,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.grid_width < 8 || self.grid_height < 8 {
            return fail(format!(
                "grid must be at least 8x8, got {}x{}",
                self.grid_width, self.grid_height
            ));
        }
        if !(self.target_speckle_fwhm >= 2.0) || !self.target_speckle_fwhm.is_finite() {
            return fail(format!(
                "target_speckle_fwhm must be >= 2 px, got {}",
                self.target_speckle_fwhm
            ));
        }
        if 4.0 * self.target_speckle_fwhm > self.grid_width.min(self.grid_height) as f64 {
            return fail(format!(
                "target_speckle_fwhm {} px is too large for a {}x{} grid",
                self.target_speckle_fwhm, self.grid_width, self.grid_height
            ));
        }
        if self.n_scatterers == 0 {
            return fail("n_scatterers must be >= 1".into());
        }
        for (name, v) in [
            ("wavelength_vacuum", self.wavelength_vacuum),
            ("diffuser_thickness", self.diffuser_thickness),
            ("refractive_index", self.refractive_index),
            ("disk_to_ccd_distance", self.disk_to_ccd_distance),
            ("pixel_pitch", self.pixel_pitch),
            ("first_stage_speckle_fwhm", self.first_stage_speckle_fwhm),
            ("mean_intensity", self.mean_intensity),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !(self.pinhole_mode_count >= 1.0) {
            return fail(format!(
                "pinhole_mode_count must be >= 1, got {}",
                self.pinhole_mode_count
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimConfig::default().validate().unwrap();
        SimConfig::desk().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            SimConfig {
                grid_width: 7,
                ..SimConfig::desk()
            },
            SimConfig {
                target_speckle_fwhm: 1.5,
                ..SimConfig::desk()
            },
            SimConfig {
                target_speckle_fwhm: f64::NAN,
                ..SimConfig::desk()
            },
            SimConfig {
                n_scatterers: 0,
                ..SimConfig::desk()
            },
            SimConfig {
                wavelength_vacuum: 0.0,
                ..SimConfig::desk()
            },
            SimConfig {
                pinhole_mode_count: 0.5,
                ..SimConfig::desk()
            },
            SimConfig {
                mean_intensity: -1.0,
                ..SimConfig::desk()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn infinite_mode_count_allowed() {
        let c = SimConfig {
            pinhole_mode_count: f64::INFINITY,
            ..SimConfig::desk()
        };
        c.validate().unwrap();
    }
}
