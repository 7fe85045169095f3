//! Fully developed (thermal) speckle fields with a prescribed speckle size.
//!
//! A field is white circular-complex Gaussian noise filtered by a real
//! Gaussian kernel, evaluated through the FFT on the periodic grid. The FFT of
//! i.i.d. circular Gaussian noise is again i.i.d. circular Gaussian noise, so
//! the noise is drawn directly in the frequency domain and only the inverse
//! transform is computed.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::frame::{ComplexField, Frame};
use crate::profile::crossing_distance;

/// Samples of a periodic Gaussian of standard deviation `sigma` on `n` points.
fn periodic_gaussian(sigma: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let d = i.min(n - i) as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// |γ(Δ)|² for lags `0..=n/2` along one axis, where γ is the normalised field
/// autocorrelation produced by a Gaussian kernel of width `sigma`.
pub fn intensity_excess_section(sigma: f64, n: usize) -> Vec<f64> {
    let g = periodic_gaussian(sigma, n);
    let ac: Vec<f64> = (0..=n / 2)
        .map(|lag| (0..n).map(|i| g[i] * g[(i + lag) % n]).sum())
        .collect();
    ac.iter().map(|v| (v / ac[0]).powi(2)).collect()
}

/// FWHM of the expected intensity autocorrelation peak for kernel width `sigma`.
pub fn expected_fwhm(sigma: f64, n: usize) -> f64 {
    let excess = intensity_excess_section(sigma, n);
    2.0 * crossing_distance(&excess, 0.5).unwrap_or(n as f64 / 2.0)
}

/// Kernel width whose expected intensity-autocorrelation FWHM equals `fwhm`,
/// found by bisection on the exact ensemble autocorrelation.
pub fn kernel_sigma_for_fwhm(fwhm: f64, n: usize) -> Result<f64> {
    let (mut lo, mut hi) = (0.05, n as f64 / 8.0);
    if !(expected_fwhm(lo, n) <= fwhm && expected_fwhm(hi, n) >= fwhm) {
        return Err(Error::Config(format!(
            "speckle FWHM {fwhm} px is not reachable on a {n}-pixel axis"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected_fwhm(mid, n) < fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Normalised field autocorrelation γ along one axis (lags `0..n`, periodic).
pub(crate) fn field_correlation(sigma: f64, n: usize) -> Vec<f64> {
    let g = periodic_gaussian(sigma, n);
    let ac: Vec<f64> = (0..n)
        .map(|lag| (0..n).map(|i| g[i] * g[(i + lag) % n]).sum())
        .collect();
    ac.iter().map(|v| v / ac[0]).collect()
}

/// Pre-planned Gaussian speckle filter for one grid size.
#[derive(Clone)]
pub struct SpeckleKernel {
    width: usize,
    height: usize,
    sigma: f64,
    /// Transfer function stored transposed (column-major), scaled so the
    /// field has unit mean intensity.
    transfer_t: Vec<f64>,
    row_fft: Arc<dyn Fft<f64>>,
    col_fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpeckleKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpeckleKernel")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl SpeckleKernel {
    /// Kernel calibrated so the intensity autocorrelation has the given FWHM.
    pub fn for_fwhm(width: usize, height: usize, fwhm: f64) -> Result<Self> {
        let sigma = kernel_sigma_for_fwhm(fwhm, width.min(height))?;
        Ok(Self::with_sigma(width, height, sigma))
    }

    pub fn with_sigma(width: usize, height: usize, sigma: f64) -> Self {
        let mut planner = FftPlanner::new();
        let hx = real_spectrum(&periodic_gaussian(sigma, width), &mut planner);
        let hy = real_spectrum(&periodic_gaussian(sigma, height), &mut planner);
        let power: f64 = hx.iter().map(|v| v * v).sum::<f64>() * hy.iter().map(|v| v * v).sum::<f64>();
        let norm = power.sqrt();
        let mut transfer_t = Vec::with_capacity(width * height);
        for &x in &hx[..width] {
            for &y in &hy[..height] {
                transfer_t.push(x * y / norm);
            }
        }
        SpeckleKernel {
            width,
            height,
            sigma,
            transfer_t,
            row_fft: planner.plan_fft_inverse(width),
            col_fft: planner.plan_fft_inverse(height),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Draws a circular Gaussian field with E|E|² = `mean_intensity` everywhere.
    pub fn draw_field<R: Rng + ?Sized>(&self, rng: &mut R, mean_intensity: f64) -> ComplexField {
        let (w, h) = (self.width, self.height);
        let amp = (0.5 * mean_intensity).sqrt();
        // Spectrum laid out transposed: `w` rows of length `h`.
        let mut spec: Vec<Complex64> = self
            .transfer_t
            .iter()
            .map(|&t| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * amp * t, im * amp * t)
            })
            .collect();
        let mut scratch = vec![
            Complex64::default();
            self.col_fft
                .get_inplace_scratch_len()
                .max(self.row_fft.get_inplace_scratch_len())
        ];
        self.col_fft.process_with_scratch(&mut spec, &mut scratch);
        let mut field = vec![Complex64::default(); w * h];
        transpose(&spec, &mut field, w, h);
        self.row_fft.process_with_scratch(&mut field, &mut scratch);
        ComplexField::new(w, h, field).expect("finite by construction")
    }

    /// Intensity of a freshly drawn field.
    pub fn draw_intensity<R: Rng + ?Sized>(&self, rng: &mut R, mean_intensity: f64) -> Frame {
        self.draw_field(rng, mean_intensity).intensity()
    }
}

fn real_spectrum(signal: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    // Symmetric input: the spectrum is real up to rounding.
    buf.iter().map(|c| c.re).collect()
}

/// `src` is `rows` x `cols` row-major with rows of length `cols`; writes its
/// transpose into `dst`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn bisection_hits_target() {
        for target in [2.0, 3.0, 3.5, 4.0, 7.5] {
            let s = kernel_sigma_for_fwhm(target, 128).unwrap();
            assert!((expected_fwhm(s, 128) - target).abs() < 1e-9, "{target}");
        }
    }

    #[test]
    fn narrow_kernel_is_one_pixel() {
        assert!((expected_fwhm(0.05, 64) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unreachable_fwhm_fails() {
        assert!(kernel_sigma_for_fwhm(0.5, 64).is_err());
        assert!(kernel_sigma_for_fwhm(60.0, 64).is_err());
    }

    #[test]
    fn deterministic_field() {
        let k = SpeckleKernel::for_fwhm(32, 24, 3.0).unwrap();
        let a = k.draw_field(&mut substream(9, 0), 1.0);
        let b = k.draw_field(&mut substream(9, 0), 1.0);
        assert_eq!(a, b);
        assert_ne!(a, k.draw_field(&mut substream(9, 1), 1.0));
    }

    #[test]
    fn mean_intensity_normalised() {
        let k = SpeckleKernel::for_fwhm(64, 64, 3.0).unwrap();
        let mut rng = substream(1, 0);
        let n = 200;
        let mean: f64 = (0..n).map(|_| k.draw_intensity(&mut rng, 2.5).mean()).sum::<f64>() / n as f64;
        assert!((mean - 2.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn transpose_roundtrip() {
        let src: Vec<Complex64> = (0..35).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut t = vec![Complex64::default(); 35];
        let mut back = vec![Complex64::default(); 35];
        transpose(&src, &mut t, 5, 7);
        transpose(&t, &mut back, 7, 5);
        assert_eq!(src, back);
        assert_eq!(t[5 + 2], src[2 * 7 + 1]);
    }
}
