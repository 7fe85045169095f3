use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::Roi;
use crate::gi::{BucketSpec, CorrelationImage, Technique};

/// Smallest background region accepted by [`snr`].
pub const MIN_OUT_PIXELS: usize = 25;

/// (G_in − G_out)/(G_in + G_out).
pub fn visibility(g_in: f64, g_out: f64) -> Result<f64> {
    let den = g_in + g_out;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::domain("visibility", format!("G_in + G_out = {den}")));
    }
    Ok((g_in - g_out) / den)
}

/// √(G_in − G_out); fails when G_in < G_out.
pub fn contrast(g_in: f64, g_out: f64) -> Result<f64> {
    let d = g_in - g_out;
    if !(d >= 0.0) {
        return Err(Error::domain(
            "contrast",
            format!("G_in = {g_in} is below G_out = {g_out}"),
        ));
    }
    Ok(d.sqrt())
}

/// Object and background pixel sets of a correlation image, as row-major
/// indices into the image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionPair {
    width: usize,
    height: usize,
    in_pixels: Vec<usize>,
    out_pixels: Vec<usize>,
}

impl RegionPair {
    pub fn new(width: usize, height: usize, mut in_pixels: Vec<usize>, mut out_pixels: Vec<usize>) -> Result<Self> {
        in_pixels.sort_unstable();
        in_pixels.dedup();
        out_pixels.sort_unstable();
        out_pixels.dedup();
        if in_pixels.is_empty() || out_pixels.is_empty() {
            return Err(Error::Config("object and background regions must be non-empty".into()));
        }
        let area = width * height;
        if in_pixels.last().is_some_and(|&p| p >= area) || out_pixels.last().is_some_and(|&p| p >= area) {
            return Err(Error::Config(format!(
                "region pixel outside the {width}x{height} image"
            )));
        }
        if let Some(p) = in_pixels.iter().find(|p| out_pixels.binary_search(p).is_ok()) {
            return Err(Error::Config(format!(
                "pixel ({}, {}) is in both the object and the background region",
                p % width,
                p / width
            )));
        }
        Ok(RegionPair {
            width,
            height,
            in_pixels,
            out_pixels,
        })
    }

    /// Object pixels from the transparent pixels of the bucket mask; the
    /// background is every pixel further than `guard` (Chebyshev distance)
    /// from the mask footprint. `image` is the correlation image's position
    /// on the frame.
    pub fn from_bucket(image: Roi, bucket: &BucketSpec, guard: usize) -> Result<Self> {
        let fp = bucket.footprint();
        let mut in_pixels = Vec::new();
        for fy in fp.y..fp.y_end() {
            for fx in fp.x..fp.x_end() {
                let open = bucket.mask().is_none_or(|m| m.get(fx - fp.x, fy - fp.y) == 1);
                if open && image.contains(fx, fy) {
                    in_pixels.push((fy - image.y) * image.width + fx - image.x);
                }
            }
        }
        if in_pixels.is_empty() {
            return Err(Error::Config(
                "the object does not overlap the correlation image".into(),
            ));
        }
        let out_pixels = outside_guard(image, fp, guard);
        Self::new(image.width, image.height, in_pixels, out_pixels)
    }

    /// Object pixels where the image exceeds half-way from its median to its
    /// plateau (the mean of the brightest 5% of pixels); the background is
    /// every pixel further than `guard` from the object's bounding box.
    pub fn from_threshold(image: &CorrelationImage, guard: usize) -> Result<Self> {
        let mut sorted = image.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let top = (sorted.len() / 20).max(1);
        let plateau = sorted[sorted.len() - top..].iter().sum::<f64>() / top as f64;
        if !(plateau > median) {
            return Err(Error::Degenerate("correlation image has no raised plateau".into()));
        }
        let level = median + 0.5 * (plateau - median);
        let w = image.width();
        let in_pixels: Vec<usize> = (0..image.values().len())
            .filter(|&i| image.values()[i] > level)
            .collect();
        let (x0, x1) = in_pixels
            .iter()
            .fold((usize::MAX, 0), |(a, b), &i| (a.min(i % w), b.max(i % w)));
        let (y0, y1) = in_pixels
            .iter()
            .fold((usize::MAX, 0), |(a, b), &i| (a.min(i / w), b.max(i / w)));
        let r = image.region();
        let bbox = Roi::new(r.x + x0, r.y + y0, x1 - x0 + 1, y1 - y0 + 1);
        Self::new(w, image.height(), in_pixels, outside_guard(r, bbox, guard))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn in_pixels(&self) -> &[usize] {
        &self.in_pixels
    }

    pub fn out_pixels(&self) -> &[usize] {
        &self.out_pixels
    }

    /// The background split into the four quadrants around the object's
    /// centroid.
    pub fn out_quadrants(&self) -> [Vec<usize>; 4] {
        let n = self.in_pixels.len() as f64;
        let cx = self.in_pixels.iter().map(|&p| (p % self.width) as f64).sum::<f64>() / n;
        let cy = self.in_pixels.iter().map(|&p| (p / self.width) as f64).sum::<f64>() / n;
        let mut q: [Vec<usize>; 4] = Default::default();
        for &p in &self.out_pixels {
            let right = (p % self.width) as f64 >= cx;
            let below = (p / self.width) as f64 >= cy;
            q[usize::from(right) + 2 * usize::from(below)].push(p);
        }
        q
    }
}

fn outside_guard(image: Roi, object: Roi, guard: usize) -> Vec<usize> {
    let x0 = object.x.saturating_sub(guard);
    let y0 = object.y.saturating_sub(guard);
    let x1 = object.x_end() + guard;
    let y1 = object.y_end() + guard;
    let mut out = Vec::new();
    for y in image.y..image.y_end() {
        for x in image.x..image.x_end() {
            if !(x >= x0 && x < x1 && y >= y0 && y < y1) {
                out.push((y - image.y) * image.width + x - image.x);
            }
        }
    }
    out
}

/// Visibility, contrast and SNR of one correlation image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiguresOfMerit {
    pub technique: Technique,
    pub n_frames: usize,
    pub g_in: f64,
    pub g_out: f64,
    pub sigma_out: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub contrast: f64,
    pub contrast_err: f64,
    pub snr: f64,
    pub snr_err: f64,
    /// The background has zero spread, so the SNR is infinite.
    pub snr_infinite: bool,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn spread(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Figures of merit from the object and background regions. The SNR is
/// (⟨G_in⟩ − ⟨G_out⟩)/σ_out; uncertainties are the spread of each figure
/// recomputed with each background quadrant alone.
pub fn snr(image: &CorrelationImage, regions: &RegionPair) -> Result<FiguresOfMerit> {
    if (regions.width, regions.height) != (image.width(), image.height()) {
        return Err(Error::Dimensions {
            expected_width: image.width(),
            expected_height: image.height(),
            width: regions.width,
            height: regions.height,
        });
    }
    if regions.out_pixels.len() < MIN_OUT_PIXELS {
        return Err(Error::Config(format!(
            "background region has {} pixels, at least {MIN_OUT_PIXELS} are needed",
            regions.out_pixels.len()
        )));
    }
    let v = image.values();
    let (g_in, _) = mean_std(regions.in_pixels.iter().map(|&p| v[p]));
    let (g_out, sigma_out) = mean_std(regions.out_pixels.iter().map(|&p| v[p]));
    let visibility_v = visibility(g_in, g_out)?;
    let contrast_v = contrast(g_in, g_out)?;
    let snr_infinite = sigma_out == 0.0;
    let snr_v = if snr_infinite {
        f64::INFINITY
    } else {
        (g_in - g_out) / sigma_out
    };

    let (mut vs, mut cs, mut ss) = (Vec::new(), Vec::new(), Vec::new());
    for q in regions.out_quadrants().iter().filter(|q| q.len() >= 2) {
        let (m, s) = mean_std(q.iter().map(|&p| v[p]));
        if let Ok(x) = visibility(g_in, m) {
            vs.push(x);
        }
        cs.push((g_in - m).max(0.0).sqrt());
        if s > 0.0 {
            ss.push((g_in - m) / s);
        }
    }
    Ok(FiguresOfMerit {
        technique: image.technique(),
        n_frames: image.n_frames_used(),
        g_in,
        g_out,
        sigma_out,
        visibility: visibility_v,
        visibility_err: spread(&vs),
        contrast: contrast_v,
        contrast_err: spread(&cs),
        snr: snr_v,
        snr_err: if snr_infinite { f64::NAN } else { spread(&ss) },
        snr_infinite,
    })
}

/// One line of a figures-of-merit table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FomRow {
    pub technique: Technique,
    pub n_frames: usize,
    pub a_ratio: f64,
    #[serde(rename = "V")]
    pub visibility: f64,
    #[serde(rename = "C")]
    pub contrast: f64,
    #[serde(rename = "C_err")]
    pub contrast_err: f64,
    #[serde(rename = "SNR")]
    pub snr: f64,
    #[serde(rename = "SNR_err")]
    pub snr_err: f64,
    /// `ok`, or the reason the figures could not be computed.
    pub status: String,
}

impl FomRow {
    pub fn from_outcome(technique: Technique, n_frames: usize, a_ratio: f64, outcome: &Result<FiguresOfMerit>) -> Self {
        match outcome {
            Ok(f) => FomRow {
                technique,
                n_frames,
                a_ratio,
                visibility: f.visibility,
                contrast: f.contrast,
                contrast_err: f.contrast_err,
                snr: f.snr,
                snr_err: f.snr_err,
                status: if f.snr_infinite {
                    "infinite_snr".into()
                } else {
                    "ok".into()
                },
            },
            Err(e) => FomRow {
                technique,
                n_frames,
                a_ratio,
                visibility: f64::NAN,
                contrast: f64::NAN,
                contrast_err: f64::NAN,
                snr: f64::NAN,
                snr_err: f64::NAN,
                status: e.to_string(),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}
