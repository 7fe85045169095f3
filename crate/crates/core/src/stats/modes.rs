//! Mode-count estimation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{FrameSource, Roi};
use crate::gi::{BucketSpec, CorrAccumulator, CorrelationImage, Selection};
use crate::pipeline::{fold_frames, Parallelism};
use crate::stats::autocorr::jackknife_se;
use crate::stats::special::{digamma, trigamma};

/// Minimum number of samples accepted by the mode-count fit.
pub const MIN_FIT_SAMPLES: usize = 100;

const JACKKNIFE_BLOCKS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeFit {
    pub mu_estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Samples at or below the noise floor, left out of the fit.
    pub excluded_bins: usize,
}

/// Maximum-likelihood gamma shape of positive samples, with the scale tied
/// to the sample mean. Non-positive samples are excluded and counted.
pub fn fit_mode_count(per_frame_means: &[f64]) -> Result<ModeFit> {
    fit_mode_count_above(per_frame_means, 0.0)
}

/// As [`fit_mode_count`], excluding samples at or below `noise_floor`.
pub fn fit_mode_count_above(samples: &[f64], noise_floor: f64) -> Result<ModeFit> {
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain("fit_mode_count", format!("non-finite sample {v}")));
    }
    let kept: Vec<f64> = samples
        .iter()
        .copied()
        .filter(|&v| v > noise_floor && v > 0.0)
        .collect();
    let excluded = samples.len() - kept.len();
    if kept.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewFrames {
            needed: MIN_FIT_SAMPLES,
            got: kept.len(),
        });
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let mean_ln = kept.iter().map(|v| v.ln()).sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    if !(var > (1e-12 * mean).powi(2)) || !(s > 1e-14) {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    // Solve ln k - ψ(k) = s, starting from the closed-form approximation.
    let mut k = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = k.ln() - digamma(k) - s;
        let df = 1.0 / k - trigamma(k);
        let mut next = k - f / df;
        if !(next > 0.0) {
            next = k / 2.0;
        }
        let done = ((next - k) / k).abs() < 1e-13;
        k = next;
        if done {
            break;
        }
    }
    let info = trigamma(k) - 1.0 / k;
    Ok(ModeFit {
        mu_estimate: k,
        std_error: 1.0 / (n * info).sqrt(),
        n_samples: kept.len(),
        excluded_bins: excluded,
    })
}

/// Average over pixels of ⟨I²⟩/⟨I⟩², the per-pixel ensemble g²(0).
/// Pixels that are dark in every frame are skipped.
pub fn g2_empirical<S: FrameSource + ?Sized>(source: &S, roi: Roi, par: Parallelism) -> Result<f64> {
    if source.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: source.len(),
        });
    }
    roi.check_within("g2 roi", source.width(), source.height())?;
    let area = roi.area();
    let (s1, s2) = fold_frames(
        source,
        0..source.len(),
        par,
        || (vec![0.0; area], vec![0.0; area]),
        |(s1, s2), _, frame| {
            for r in 0..roi.height {
                let row = &frame.row(roi.y + r)[roi.x..roi.x_end()];
                for (k, &v) in row.iter().enumerate() {
                    let v = v as f64;
                    s1[r * roi.width + k] += v;
                    s2[r * roi.width + k] += v * v;
                }
            }
            Ok(())
        },
        |(a1, a2), (b1, b2)| {
            a1.iter_mut().zip(&b1).for_each(|(x, y)| *x += y);
            a2.iter_mut().zip(&b2).for_each(|(x, y)| *x += y);
        },
    )?;
    let n = source.len() as f64;
    let (mut total, mut count) = (0.0, 0usize);
    for (a, b) in s1.iter().zip(&s2) {
        if *a > 0.0 {
            total += (b / n) / (a / n).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Degenerate("every pixel is dark".into()));
    }
    Ok(total / count as f64)
}

/// Outcome of correlating a few-pixel bucket with every pixel.
#[derive(Debug, Clone)]
pub struct MultiPixelResult {
    pub image: CorrelationImage,
    /// Mean correlation at the bucket pixels.
    pub peak: f64,
    pub peak_uncertainty: f64,
    /// Mean correlation far from every bucket pixel.
    pub background: f64,
    pub background_uncertainty: f64,
    /// μ_f from the peak, taking μ_s = number of pixels.
    pub from_peak: ModeFit,
    /// μ_f from the background level 1 + 1/μ_f.
    pub from_background: ModeFit,
}

fn mu_from_peak(peak: f64, k: usize) -> f64 {
    1.0 / (peak / (1.0 + 1.0 / k as f64) - 1.0)
}

fn mu_from_background(background: f64) -> f64 {
    1.0 / (background - 1.0)
}

/// Builds a bucket from `pixels`, correlates it with the whole frame and
/// inverts the peak and background levels for μ_f.
///
/// Pixels must be further apart than `speckle_fwhm` so that each carries an
/// independent mode. The background uses pixels more than three speckle
/// widths from every bucket pixel.
pub fn multi_pixel_correlation<S: FrameSource + ?Sized>(
    source: &S,
    pixels: &[(usize, usize)],
    speckle_fwhm: f64,
    par: Parallelism,
) -> Result<MultiPixelResult> {
    let n = source.len();
    if n < 2 {
        return Err(Error::TooFewFrames { needed: 2, got: n });
    }
    let (w, h) = (source.width(), source.height());
    for (i, &(ax, ay)) in pixels.iter().enumerate() {
        if ax >= w || ay >= h {
            return Err(Error::OutOfBounds {
                what: "bucket pixel",
                x: ax,
                y: ay,
                width: 1,
                height: 1,
                frame_width: w,
                frame_height: h,
            });
        }
        for &(bx, by) in &pixels[i + 1..] {
            let d = ((ax as f64 - bx as f64).powi(2) + (ay as f64 - by as f64).powi(2)).sqrt();
            if d <= speckle_fwhm {
                return Err(Error::PixelsTooClose {
                    ax,
                    ay,
                    bx,
                    by,
                    distance: d,
                    min_separation: speckle_fwhm,
                });
            }
        }
    }
    let bucket = BucketSpec::from_pixels(pixels)?;
    let template = CorrAccumulator::new(w, h, Roi::full(w, h), vec![bucket])?;

    let n_blocks = JACKKNIFE_BLOCKS.min(n);
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut acc = template.empty_like();
        acc.accumulate_source(source, b * n / n_blocks..(b + 1) * n / n_blocks, par)?;
        blocks.push(acc);
    }
    let mut total = template.empty_like();
    for b in &blocks {
        total.merge(b)?;
    }

    let guard = 3.0 * speckle_fwhm;
    let far: Vec<usize> = (0..w * h)
        .filter(|&p| {
            let (x, y) = ((p % w) as f64, (p / w) as f64);
            pixels
                .iter()
                .all(|&(px, py)| ((x - px as f64).powi(2) + (y - py as f64).powi(2)).sqrt() > guard)
        })
        .collect();
    if far.is_empty() {
        return Err(Error::Degenerate(
            "no pixels far enough from the bucket for a background".into(),
        ));
    }
    let levels = |img: &CorrelationImage| {
        let peak = pixels.iter().map(|&(x, y)| img.get(x, y)).sum::<f64>() / pixels.len() as f64;
        let bg = far.iter().map(|&p| img.values()[p]).sum::<f64>() / far.len() as f64;
        (peak, bg)
    };
    let image = total.finalize(Selection::Gi { bucket: 0 })?;
    let (peak, background) = levels(&image);

    let mut reps = Vec::new();
    if n_blocks >= 2 && n >= 2 * n_blocks {
        for b in &blocks {
            let mut rest = template.empty_like();
            for other in &blocks {
                if !std::ptr::eq(other, b) {
                    rest.merge(other)?;
                }
            }
            reps.push(levels(&rest.finalize(Selection::Gi { bucket: 0 })?));
        }
    }
    let se = |f: &dyn Fn(&(f64, f64)) -> f64| jackknife_se(&reps.iter().map(f).collect::<Vec<_>>()).unwrap_or(f64::NAN);
    let k = pixels.len();
    let fit = |mu: f64, std_error: f64| ModeFit {
        mu_estimate: mu,
        std_error,
        n_samples: n,
        excluded_bins: 0,
    };
    Ok(MultiPixelResult {
        peak_uncertainty: se(&|r| r.0),
        background_uncertainty: se(&|r| r.1),
        from_peak: fit(mu_from_peak(peak, k), se(&|r| mu_from_peak(r.0, k))),
        from_background: fit(mu_from_background(background), se(&|r| mu_from_background(r.1))),
        image,
        peak,
        background,
    })
}
