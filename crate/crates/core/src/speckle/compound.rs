//! Fast super-thermal surrogate: a gamma-distributed frame brightness times
//! an independent thermal speckle frame.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::speckle::config::SimConfig;
use crate::speckle::thermal::SpeckleKernel;

#[derive(Debug, Clone)]
pub struct CompoundModel {
    kernel: SpeckleKernel,
    brightness: Option<Gamma<f64>>,
    mean_intensity: f64,
}

impl CompoundModel {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let kernel = SpeckleKernel::for_fwhm(config.grid_width, config.grid_height, config.target_speckle_fwhm)?;
        Self::with_kernel(kernel, config.pinhole_mode_count, config.mean_intensity)
    }

    pub(crate) fn with_kernel(kernel: SpeckleKernel, mode_count: f64, mean_intensity: f64) -> Result<Self> {
        let brightness = if mode_count.is_finite() {
            Some(
                Gamma::new(mode_count, 1.0 / mode_count)
                    .map_err(|e| Error::Config(format!("pinhole_mode_count {mode_count}: {e}")))?,
            )
        } else {
            None
        };
        Ok(CompoundModel {
            kernel,
            brightness,
            mean_intensity,
        })
    }

    pub fn kernel(&self) -> &SpeckleKernel {
        &self.kernel
    }

    pub fn frame<R: Rng + ?Sized>(&self, rng: &mut R) -> Frame {
        let s = self.brightness.map_or(1.0, |g| g.sample(rng));
        self.kernel.draw_intensity(rng, s * self.mean_intensity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn infinite_modes_give_thermal_brightness() {
        let config = SimConfig {
            grid_width: 16,
            grid_height: 16,
            target_speckle_fwhm: 2.0,
            pinhole_mode_count: f64::INFINITY,
            ..SimConfig::default()
        };
        let model = CompoundModel::new(&config).unwrap();
        let kernel = model.kernel().clone();
        // Without a brightness draw the frame equals a bare thermal frame.
        assert_eq!(
            model.frame(&mut substream(1, 2)),
            kernel.draw_intensity(&mut substream(1, 2), 1.0)
        );
    }

    #[test]
    fn frame_brightness_fluctuates() {
        let config = SimConfig {
            grid_width: 32,
            grid_height: 32,
            target_speckle_fwhm: 2.0,
            pinhole_mode_count: 1.0,
            ..SimConfig::default()
        };
        let model = CompoundModel::new(&config).unwrap();
        let means: Vec<f64> = (0..2000).map(|i| model.frame(&mut substream(4, i)).mean()).collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / means.len() as f64;
        // Exponential brightness: relative variance near 1.
        assert!((m - 1.0).abs() < 0.08, "{m}");
        assert!((var / (m * m) - 1.0).abs() < 0.2, "{var}");
    }
}
