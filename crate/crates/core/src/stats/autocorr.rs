//! Ensemble spatial intensity autocorrelation and speckle-size measurement.
//!
//! For every frame the lag sums Σₓ I(x)·I(x+Δ) over the region of interest
//! are obtained from the zero-padded power spectrum. Spectra are summed over
//! frames and transformed back once; dividing by the number of overlapping
//! pixel pairs and by the square of the ensemble mean intensity gives
//! ⟨I(x)I(x+Δ)⟩/⟨I⟩², whose zero-lag value is g²(0) and whose large-lag
//! plateau is the correlation between distinct speckles.

use std::collections::BTreeMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSource, Roi};
use crate::pipeline::{fold_frames, Parallelism};
use crate::profile::crossing_distance;

/// Frame blocks used for jackknife uncertainties.
const JACKKNIFE_BLOCKS: usize = 16;

/// Normalised correlation over lags `-max_dx..=max_dx`, `-max_dy..=max_dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMap {
    pub max_dx: usize,
    pub max_dy: usize,
    values: Vec<f64>,
}

impl LagMap {
    pub fn width(&self) -> usize {
        2 * self.max_dx + 1
    }

    pub fn height(&self) -> usize {
        2 * self.max_dy + 1
    }

    pub fn get(&self, dx: isize, dy: isize) -> f64 {
        let x = (dx + self.max_dx as isize) as usize;
        let y = (dy + self.max_dy as isize) as usize;
        self.values[y * self.width() + x]
    }

    /// Row-major values, lag `(-max_dx, -max_dy)` first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `C(dx, 0)` for `dx = 0..=max_dx`.
    pub fn section_x(&self) -> Vec<f64> {
        (0..=self.max_dx as isize).map(|d| self.get(d, 0)).collect()
    }

    /// `C(0, dy)` for `dy = 0..=max_dy`.
    pub fn section_y(&self) -> Vec<f64> {
        (0..=self.max_dy as isize).map(|d| self.get(0, d)).collect()
    }
}

/// Conditions that make parts of an [`AutocorrResult`] unreliable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AutocorrFlag {
    /// The region is narrower than four speckles, so the plateau is poorly sampled.
    RoiTooSmall,
    /// No correlation peak above the background: the width is undefined.
    FwhmUndefined,
    /// Speckles narrower than two pixels: a pixel may record several modes.
    SubPixelSpeckle,
    /// No lags far enough from the peak; the background uses the outer half of the map.
    ShortBackground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrResult {
    pub map: LagMap,
    pub peak_value: f64,
    pub peak_uncertainty: f64,
    pub background_value: f64,
    pub background_uncertainty: f64,
    pub fwhm_x: Option<f64>,
    pub fwhm_y: Option<f64>,
    pub fwhm_x_uncertainty: Option<f64>,
    pub fwhm_y_uncertainty: Option<f64>,
    pub n_frames: usize,
    pub flags: Vec<AutocorrFlag>,
}

impl AutocorrResult {
    /// Mean of the two axis widths, if both are defined.
    pub fn fwhm(&self) -> Option<f64> {
        Some(0.5 * (self.fwhm_x? + self.fwhm_y?))
    }
}

struct Plan {
    roi: Roi,
    pw: usize,
    ph: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(roi: Roi) -> Self {
        let (pw, ph) = (2 * roi.width, 2 * roi.height);
        let mut planner = FftPlanner::new();
        Plan {
            roi,
            pw,
            ph,
            row_fwd: planner.plan_fft_forward(pw),
            col_fwd: planner.plan_fft_forward(ph),
            row_inv: planner.plan_fft_inverse(pw),
            col_inv: planner.plan_fft_inverse(ph),
        }
    }

    /// Forward 2-D transform of `a + i·b` (both cropped to the roi), stored
    /// column-major (`pw` columns of length `ph`).
    fn transform_pair(&self, a: &Frame, b: Option<&Frame>, rows: &mut Vec<Complex64>, cols: &mut Vec<Complex64>) {
        let Roi { x, y, width, height } = self.roi;
        rows.clear();
        rows.resize(height * self.pw, Complex64::default());
        for r in 0..height {
            let out = &mut rows[r * self.pw..r * self.pw + width];
            let ra = &a.row(y + r)[x..x + width];
            match b {
                Some(b) => {
                    let rb = &b.row(y + r)[x..x + width];
                    for ((o, &va), &vb) in out.iter_mut().zip(ra).zip(rb) {
                        *o = Complex64::new(va as f64, vb as f64);
                    }
                }
                None => {
                    for (o, &va) in out.iter_mut().zip(ra) {
                        *o = Complex64::new(va as f64, 0.0);
                    }
                }
            }
        }
        self.row_fwd.process(rows);
        cols.clear();
        cols.resize(self.pw * self.ph, Complex64::default());
        for r in 0..height {
            for c in 0..self.pw {
                cols[c * self.ph + r] = rows[r * self.pw + c];
            }
        }
        self.col_fwd.process(cols);
    }

    /// Index of frequency `-k` in the column-major layout.
    fn mirror(&self, idx: usize) -> usize {
        let (c, r) = (idx / self.ph, idx % self.ph);
        let c2 = (self.pw - c) % self.pw;
        let r2 = (self.ph - r) % self.ph;
        c2 * self.ph + r2
    }

    /// Lag sums Σₓ I(x)I(x+Δ) from a summed power spectrum, circularly indexed.
    fn lag_sums(&self, power: &[f64]) -> Vec<f64> {
        let mut cols: Vec<Complex64> = power.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        self.col_inv.process(&mut cols);
        let mut rows = vec![Complex64::default(); self.pw * self.ph];
        for c in 0..self.pw {
            for r in 0..self.ph {
                rows[r * self.pw + c] = cols[c * self.ph + r];
            }
        }
        self.row_inv.process(&mut rows);
        let scale = 1.0 / (self.pw * self.ph) as f64;
        rows.iter().map(|v| v.re * scale).collect()
    }
}

#[derive(Default)]
struct Block {
    power: Vec<f64>,
    intensity: f64,
    frames: usize,
}

impl Block {
    fn absorb(&mut self, other: Block) {
        if self.power.is_empty() {
            self.power = other.power;
        } else {
            for (a, b) in self.power.iter_mut().zip(&other.power) {
                *a += b;
            }
        }
        self.intensity += other.intensity;
        self.frames += other.frames;
    }
}

struct Partial {
    blocks: BTreeMap<usize, Block>,
    pending: Option<(usize, Frame)>,
    rows: Vec<Complex64>,
    cols: Vec<Complex64>,
}

impl Partial {
    fn new() -> Self {
        Partial {
            blocks: BTreeMap::new(),
            pending: None,
            rows: Vec::new(),
            cols: Vec::new(),
        }
    }

    fn add_power(&mut self, plan: &Plan, block: usize, power: impl Iterator<Item = f64>, intensity: f64) {
        let entry = self.blocks.entry(block).or_default();
        if entry.power.is_empty() {
            entry.power = vec![0.0; plan.pw * plan.ph];
        }
        for (a, p) in entry.power.iter_mut().zip(power) {
            *a += p;
        }
        entry.intensity += intensity;
        entry.frames += 1;
    }

    /// Transforms the pending frame together with `next` (if any).
    fn process(&mut self, plan: &Plan, block_of: &dyn Fn(usize) -> usize, next: Option<(usize, &Frame)>) {
        let Some((ia, a)) = self.pending.take() else {
            return;
        };
        let (mut rows, mut cols) = (std::mem::take(&mut self.rows), std::mem::take(&mut self.cols));
        plan.transform_pair(&a, next.map(|(_, b)| b), &mut rows, &mut cols);
        let sa = roi_sum(&a, &plan.roi);
        match next {
            None => {
                self.add_power(plan, block_of(ia), cols.iter().map(|c| c.norm_sqr()), sa);
            }
            Some((ib, b)) => {
                // Spectra of the real and imaginary parts from F(k) and F(-k).
                let pa = (0..cols.len()).map(|k| {
                    let (f, g) = (cols[k], cols[plan.mirror(k)].conj());
                    (f + g).norm_sqr() / 4.0
                });
                self.add_power(plan, block_of(ia), pa, sa);
                let pb = (0..cols.len()).map(|k| {
                    let (f, g) = (cols[k], cols[plan.mirror(k)].conj());
                    (f - g).norm_sqr() / 4.0
                });
                self.add_power(plan, block_of(ib), pb, roi_sum(b, &plan.roi));
            }
        }
        self.rows = rows;
        self.cols = cols;
    }
}

fn roi_sum(frame: &Frame, roi: &Roi) -> f64 {
    (roi.y..roi.y_end())
        .map(|y| frame.row(y)[roi.x..roi.x_end()].iter().map(|&v| v as f64).sum::<f64>())
        .sum()
}

/// Ensemble autocorrelation of the frames of `source` inside `roi`.
pub fn spatial_autocorrelation<S: FrameSource + ?Sized>(
    source: &S,
    roi: Roi,
    par: Parallelism,
) -> Result<AutocorrResult> {
    let n = source.len();
    if n < 2 {
        return Err(Error::TooFewFrames { needed: 2, got: n });
    }
    roi.check_within("autocorrelation roi", source.width(), source.height())?;
    if roi.width < 2 || roi.height < 2 {
        return Err(Error::Config("autocorrelation roi must be at least 2x2".into()));
    }
    let plan = Plan::new(roi);
    let n_blocks = JACKKNIFE_BLOCKS.min(n);
    let block_of = move |i: usize| i * n_blocks / n;
    let mut total = fold_frames(
        source,
        0..n,
        par,
        Partial::new,
        |acc, i, frame| {
            if acc.pending.is_some() {
                acc.process(&plan, &block_of, Some((i, frame)));
            } else {
                acc.pending = Some((i, frame.clone()));
            }
            Ok(())
        },
        |acc, mut later| {
            acc.process(&plan, &block_of, None);
            later.process(&plan, &block_of, None);
            for (k, b) in later.blocks {
                acc.blocks.entry(k).or_default().absorb(b);
            }
        },
    )?;
    total.process(&plan, &block_of, None);

    let blocks: Vec<Block> = total.blocks.into_values().collect();
    let sum_all = blocks.iter().fold(Block::default(), |mut acc, b| {
        acc.absorb(Block {
            power: b.power.clone(),
            intensity: b.intensity,
            frames: b.frames,
        });
        acc
    });
    if !(sum_all.intensity > 0.0) {
        return Err(Error::Degenerate("mean intensity in the roi is zero".into()));
    }
    let full = Summary::from_block(&plan, &sum_all);
    let mut flags = full.flags.clone();

    // Leave-one-block-out replicates.
    let mut reps = Vec::new();
    if blocks.len() >= 2 {
        for b in &blocks {
            let rest = Block {
                power: sum_all.power.iter().zip(&b.power).map(|(a, x)| a - x).collect(),
                intensity: sum_all.intensity - b.intensity,
                frames: sum_all.frames - b.frames,
            };
            if rest.intensity > 0.0 {
                reps.push(Summary::from_block(&plan, &rest));
            }
        }
    }
    let jack = |f: &dyn Fn(&Summary) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = reps.iter().map(f).collect();
        jackknife_se(&v?)
    };
    let peak_uncertainty = jack(&|s| Some(s.peak)).unwrap_or(0.0);
    let fwhm_x_uncertainty = jack(&|s| s.fwhm_x);
    let fwhm_y_uncertainty = jack(&|s| s.fwhm_y);

    let speckle = full.fwhm_x.zip(full.fwhm_y).map(|(a, b)| 0.5 * (a + b));
    if let Some(d) = speckle {
        if (roi.width.min(roi.height) as f64) < 4.0 * d {
            flags.push(AutocorrFlag::RoiTooSmall);
        }
        if d < 2.0 {
            flags.push(AutocorrFlag::SubPixelSpeckle);
        }
    }
    Ok(AutocorrResult {
        map: full.map,
        peak_value: full.peak,
        peak_uncertainty,
        background_value: full.background,
        background_uncertainty: full.background_spread,
        fwhm_x: full.fwhm_x,
        fwhm_y: full.fwhm_y,
        fwhm_x_uncertainty,
        fwhm_y_uncertainty,
        n_frames: n,
        flags,
    })
}

/// Standard error of a statistic from its leave-one-out replicates.
pub(crate) fn jackknife_se(replicates: &[f64]) -> Option<f64> {
    let b = replicates.len();
    if b < 2 {
        return None;
    }
    let mean = replicates.iter().sum::<f64>() / b as f64;
    let ss: f64 = replicates.iter().map(|v| (v - mean).powi(2)).sum();
    Some(((b as f64 - 1.0) / b as f64 * ss).sqrt())
}

struct Summary {
    map: LagMap,
    peak: f64,
    background: f64,
    background_spread: f64,
    fwhm_x: Option<f64>,
    fwhm_y: Option<f64>,
    flags: Vec<AutocorrFlag>,
}

impl Summary {
    fn from_block(plan: &Plan, block: &Block) -> Summary {
        let Roi {
            width: w, height: h, ..
        } = plan.roi;
        let mean = block.intensity / (block.frames * w * h) as f64;
        let sums = plan.lag_sums(&block.power);
        let (mx, my) = (w / 2, h / 2);
        let mut values = Vec::with_capacity((2 * mx + 1) * (2 * my + 1));
        for dy in -(my as isize)..=(my as isize) {
            for dx in -(mx as isize)..=(mx as isize) {
                let idx = dy.rem_euclid(plan.ph as isize) as usize * plan.pw + dx.rem_euclid(plan.pw as isize) as usize;
                let overlap = ((w - dx.unsigned_abs()) * (h - dy.unsigned_abs()) * block.frames) as f64;
                values.push(sums[idx] / overlap / (mean * mean));
            }
        }
        let map = LagMap {
            max_dx: mx,
            max_dy: my,
            values,
        };
        let peak = map.get(0, 0);
        let mut flags = Vec::new();

        // Start from the outer half of the map, then exclude 3 FWHM.
        let outer = 0.5 * mx.min(my) as f64;
        let (mut background, mut spread) = background_over(&map, outer);
        let mut widths = widths(&map, peak, background);
        if let Some(d) = widths.0.zip(widths.1).map(|(a, b)| 0.5 * (a + b)) {
            let guard = 3.0 * d;
            if guard < mx.min(my) as f64 {
                (background, spread) = background_over(&map, guard);
                widths = self::widths(&map, peak, background);
            } else {
                flags.push(AutocorrFlag::ShortBackground);
            }
        }
        if widths.0.is_none() || widths.1.is_none() {
            flags.push(AutocorrFlag::FwhmUndefined);
        }
        Summary {
            map,
            peak,
            background,
            background_spread: spread,
            fwhm_x: widths.0,
            fwhm_y: widths.1,
            flags,
        }
    }
}

/// Mean over lags with radius above `radius`, and the standard deviation of
/// the means over four angular sectors of the (non-redundant) half plane.
fn background_over(map: &LagMap, radius: f64) -> (f64, f64) {
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    for dy in 0..=(map.max_dy as isize) {
        for dx in -(map.max_dx as isize)..=(map.max_dx as isize) {
            if dy == 0 && dx <= 0 {
                continue;
            }
            let r = ((dx * dx + dy * dy) as f64).sqrt();
            if r <= radius {
                continue;
            }
            let angle = (dy as f64).atan2(dx as f64);
            let sector = ((angle / (std::f64::consts::PI / 4.0)) as usize).min(3);
            sums[sector] += map.get(dx, dy);
            counts[sector] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return (map.get(0, 0), 0.0);
    }
    let mean = sums.iter().sum::<f64>() / total as f64;
    let means: Vec<f64> = (0..4)
        .filter(|&i| counts[i] > 0)
        .map(|i| sums[i] / counts[i] as f64)
        .collect();
    let spread = if means.len() >= 2 {
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, spread)
}

fn widths(map: &LagMap, peak: f64, background: f64) -> (Option<f64>, Option<f64>) {
    let excess = peak - background;
    let rel = excess / peak.abs().max(f64::MIN_POSITIVE);
    if !(rel > 1e-9) {
        return (None, None);
    }
    let width = |section: Vec<f64>| {
        let shifted: Vec<f64> = section.iter().map(|v| v - background).collect();
        crossing_distance(&shifted, 0.5 * excess).map(|d| 2.0 * d)
    };
    (width(map.section_x()), width(map.section_y()))
}
