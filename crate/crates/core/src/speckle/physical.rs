//! Second-diffuser propagation: a pinhole-filtered speckle field illuminates
//! discrete scattering centres whose spherical wavelets add on the camera.

use std::f64::consts::PI;

use rand::Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frame::{ComplexField, Frame};
use crate::profile::crossing_distance;
use crate::speckle::config::SimConfig;
use crate::speckle::pinhole::{calibrate_pinhole_radius, select_pinhole, Pinhole};
use crate::speckle::thermal::SpeckleKernel;

/// A point scatterer on the second diffuser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub amplitude: Complex64,
}

/// Camera geometry and optical constants of the propagation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    pub pixel_pitch: f64,
    /// Axial position of the camera plane.
    pub ccd_z: f64,
    /// Vacuum wavenumber.
    pub k: f64,
    /// Wavenumber inside the diffuser.
    pub k_medium: f64,
}

impl Geometry {
    pub fn from_config(config: &SimConfig) -> Self {
        let k = 2.0 * PI / config.wavelength_vacuum;
        Geometry {
            width: config.grid_width,
            height: config.grid_height,
            pixel_pitch: config.pixel_pitch,
            ccd_z: config.diffuser_thickness + config.disk_to_ccd_distance,
            k,
            k_medium: k * config.refractive_index,
        }
    }

    /// Transverse position of pixel `(i, j)`, centred on the optical axis.
    fn pixel_xy(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 - (self.width as f64 - 1.0) / 2.0) * self.pixel_pitch,
            (j as f64 - (self.height as f64 - 1.0) / 2.0) * self.pixel_pitch,
        )
    }
}

/// Field on the camera: Σₙ Aₙ·exp(i·k·rₙ)·exp(i·k_medium·zₙ), scaled by `norm`.
pub fn propagate(scatterers: &[Scatterer], geometry: &Geometry, norm: f64) -> ComplexField {
    let (w, h) = (geometry.width, geometry.height);
    let mut field = vec![Complex64::default(); w * h];
    for s in scatterers {
        if s.amplitude == Complex64::default() {
            continue;
        }
        let axial = geometry.ccd_z - s.z;
        let base = s.amplitude * Complex64::from_polar(1.0, geometry.k * axial + geometry.k_medium * s.z);
        for j in 0..h {
            let (_, py) = geometry.pixel_xy(0, j);
            let dy = py - s.y;
            let row = &mut field[j * w..(j + 1) * w];
            for (i, out) in row.iter_mut().enumerate() {
                let (px, _) = geometry.pixel_xy(i, j);
                let dx = px - s.x;
                let rho2 = dx * dx + dy * dy;
                // r - axial, written to avoid cancellation.
                let excess = rho2 / ((rho2 + axial * axial).sqrt() + axial);
                *out += base * Complex64::from_polar(1.0, geometry.k * excess);
            }
        }
    }
    for v in &mut field {
        *v *= norm;
    }
    ComplexField::new(w, h, field).expect("finite by construction")
}

/// First-order Bessel function J₁ by its power series (adequate for |x| < 12).
fn bessel_j1(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half;
    let mut sum = term;
    for k in 1..60 {
        term *= -half * half / (k as f64 * (k as f64 + 1.0));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn airy(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0
    } else {
        let v = 2.0 * bessel_j1(x) / x;
        v * v
    }
}

/// Expected intensity-autocorrelation FWHM on the camera, in pixels, for a
/// uniformly illuminated disk of radius `radius` on the second diffuser.
pub fn airy_fwhm(radius: f64, geometry: &Geometry, distance: f64) -> f64 {
    let scale = geometry.k * radius * geometry.pixel_pitch / distance;
    let lags = (2.0 * 3.8317 / scale).ceil() as usize + 2;
    let excess: Vec<f64> = (0..=lags).map(|d| airy(scale * d as f64)).collect();
    2.0 * crossing_distance(&excess, 0.5).unwrap_or(lags as f64)
}

/// Radius of the illuminated disk that yields the target speckle FWHM.
pub fn illuminated_radius(fwhm: f64, geometry: &Geometry, distance: f64) -> Result<f64> {
    // Half maximum of the Airy pattern sits near x = 1.6163.
    let guess = 1.6163 * distance / (geometry.k * geometry.pixel_pitch * fwhm / 2.0);
    let (mut lo, mut hi) = (guess / 8.0, guess * 8.0);
    if !(airy_fwhm(lo, geometry, distance) > fwhm && airy_fwhm(hi, geometry, distance) < fwhm) {
        return Err(Error::Config(format!(
            "speckle FWHM {fwhm} px cannot be produced by this geometry"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if airy_fwhm(mid, geometry, distance) > fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Calibrated double-diffuser model.
#[derive(Debug, Clone)]
pub struct PhysicalModel {
    geometry: Geometry,
    first_stage: SpeckleKernel,
    pinhole: Pinhole,
    disk_radius: f64,
    thickness: f64,
    n_scatterers: usize,
    norm: f64,
}

impl PhysicalModel {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let geometry = Geometry::from_config(config);
        let (w, h) = (config.grid_width, config.grid_height);
        let first_stage = SpeckleKernel::for_fwhm(w, h, config.first_stage_speckle_fwhm)?;
        let radius = calibrate_pinhole_radius(
            config.pinhole_mode_count,
            w,
            h,
            first_stage.sigma(),
            config.n_scatterers,
        )?;
        let pinhole = Pinhole::centered(w, h, radius);
        let open = open_fraction(&pinhole, w, h);
        let disk_radius = illuminated_radius(config.target_speckle_fwhm, &geometry, config.disk_to_ccd_distance)?;
        Ok(PhysicalModel {
            geometry,
            first_stage,
            pinhole,
            disk_radius,
            thickness: config.diffuser_thickness,
            n_scatterers: config.n_scatterers,
            norm: (config.mean_intensity / (config.n_scatterers as f64 * open)).sqrt(),
        })
    }

    pub fn pinhole(&self) -> &Pinhole {
        &self.pinhole
    }

    pub fn disk_radius(&self) -> f64 {
        self.disk_radius
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Pinhole-filtered first-stage field.
    pub fn first_stage_field<R: Rng + ?Sized>(&self, rng: &mut R) -> ComplexField {
        select_pinhole(&self.first_stage.draw_field(rng, 1.0), &self.pinhole)
    }

    /// Scatterers for one frame, each carrying the field of the pinhole point
    /// that maps onto its position.
    pub fn scatterers<R: Rng + ?Sized>(&self, field: &ComplexField, rng: &mut R) -> Vec<Scatterer> {
        (0..self.n_scatterers)
            .map(|_| {
                let (u, v) = loop {
                    let u = 2.0 * rng.random::<f64>() - 1.0;
                    let v = 2.0 * rng.random::<f64>() - 1.0;
                    if u * u + v * v <= 1.0 {
                        break (u, v);
                    }
                };
                let z = self.thickness + (rng.random::<f64>() - 0.5) * self.thickness;
                let amplitude = self
                    .pinhole
                    .sample_pixel(u, v, field.width(), field.height())
                    .map_or(Complex64::default(), |(x, y)| field.get(x, y));
                Scatterer {
                    x: u * self.disk_radius,
                    y: v * self.disk_radius,
                    z,
                    amplitude,
                }
            })
            .collect()
    }

    pub fn frame<R: Rng + ?Sized>(&self, rng: &mut R) -> Frame {
        let field = self.first_stage_field(rng);
        let scatterers = self.scatterers(&field, rng);
        propagate(&scatterers, &self.geometry, self.norm).intensity()
    }
}

/// Probability that a uniform point of the aperture rounds to an open pixel.
fn open_fraction(pinhole: &Pinhole, width: usize, height: usize) -> f64 {
    const N: usize = 400;
    let mut open = 0usize;
    let mut total = 0usize;
    for a in 0..N {
        let u = -1.0 + (a as f64 + 0.5) * 2.0 / N as f64;
        for b in 0..N {
            let v = -1.0 + (b as f64 + 0.5) * 2.0 / N as f64;
            if u * u + v * v > 1.0 {
                continue;
            }
            total += 1;
            if pinhole.sample_pixel(u, v, width, height).is_some() {
                open += 1;
            }
        }
    }
    open as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn small_config() -> SimConfig {
        SimConfig {
            grid_width: 32,
            grid_height: 32,
            target_speckle_fwhm: 3.0,
            first_stage_speckle_fwhm: 8.0,
            pinhole_mode_count: 1.2,
            ..SimConfig::default()
        }
    }

    #[test]
    fn j1_matches_reference_values() {
        // Reference values from tables of J1.
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j1(3.0) - 0.339_058_958_525_936_4).abs() < 1e-13);
        assert!(bessel_j1(3.831_705_970_207_512).abs() < 1e-12);
    }

    #[test]
    fn airy_calibration_round_trip() {
        let g = Geometry::from_config(&SimConfig::default());
        for fwhm in [2.5, 3.5, 6.0] {
            let a = illuminated_radius(fwhm, &g, 1e5).unwrap();
            assert!((airy_fwhm(a, &g, 1e5) - fwhm).abs() < 1e-9);
        }
    }

    #[test]
    fn single_scatterer_flat_field_is_uniform() {
        let g = Geometry {
            width: 16,
            height: 16,
            pixel_pitch: 4.65,
            ccd_z: 1e5,
            k: 12.0,
            k_medium: 18.0,
        };
        let s = Scatterer {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            amplitude: Complex64::new(1.0, 0.0),
        };
        let frame = propagate(&[s], &g, 1.0).intensity();
        for &v in frame.data() {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn frames_are_nonnegative_and_deterministic() {
        let model = PhysicalModel::new(&small_config()).unwrap();
        let a = model.frame(&mut substream(3, 5));
        let b = model.frame(&mut substream(3, 5));
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn mean_intensity_is_normalised() {
        let model = PhysicalModel::new(&small_config()).unwrap();
        let n = 400;
        let mean: f64 = (0..n).map(|i| model.frame(&mut substream(11, i)).mean()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn infinite_mode_count_is_rejected() {
        let config = SimConfig {
            pinhole_mode_count: f64::INFINITY,
            ..small_config()
        };
        assert!(matches!(
            PhysicalModel::new(&config),
            Err(Error::PinholeTooLarge { .. })
        ));
    }
}
