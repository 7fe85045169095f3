use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frame::{FrameSource, Roi};
use crate::gi::{BucketSpec, CorrAccumulator, Selection, Technique};
use crate::masks::slit_mask;
use crate::metrology::fom::{snr, FomRow, RegionPair};
use crate::pipeline::Parallelism;

/// Shared geometry of the sweep experiments.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    /// Region holding the object in the bucket arm.
    pub bucket_roi: Roi,
    /// Region of the frame over which correlation images are formed.
    pub reference_roi: Roi,
    /// Bucket subtracted in DGI.
    pub reference_bucket: BucketSpec,
    /// Background pixels lie further than this from the object footprint.
    pub guard: usize,
    pub speckle_fwhm: f64,
}

impl SweepSetup {
    /// Area of one speckle, π(FWHM/2)².
    pub fn speckle_area(&self) -> f64 {
        PI * (self.speckle_fwhm / 2.0).powi(2)
    }

    /// A slit of `width`x`height` centred in the bucket region.
    pub fn centered_slit(&self, width: usize, height: usize) -> Result<BucketSpec> {
        let r = self.bucket_roi;
        if width > r.width || height > r.height {
            return Err(Error::Config(format!(
                "a {width}x{height} object does not fit the {}x{} bucket region",
                r.width, r.height
            )));
        }
        let mask = slit_mask(width, height)?.placed_at((r.width - width) / 2, (r.height - height) / 2);
        BucketSpec::new(r, Some(mask))
    }

    fn rows(&self, acc: &CorrAccumulator, test: usize, reference: usize) -> Result<[FomRow; 2]> {
        let bucket = &acc.buckets()[test];
        let a_ratio = bucket.open_area() as f64 / self.speckle_area();
        let regions = RegionPair::from_bucket(self.reference_roi, bucket, self.guard)?;
        let row = |sel, technique| {
            let fom = acc.finalize(sel).and_then(|img| snr(&img, &regions));
            FomRow::from_outcome(technique, acc.n_frames(), a_ratio, &fom)
        };
        Ok([
            row(Selection::Gi { bucket: test }, Technique::Gi),
            row(Selection::Dgi { test, reference }, Technique::Dgi),
        ])
    }
}

/// GI and DGI figures of merit for centred slits of each `(width, height)`,
/// all accumulated in a single pass over `source`.
pub fn sweep_object_size<S: FrameSource + ?Sized>(
    source: &S,
    setup: &SweepSetup,
    sizes: &[(usize, usize)],
    par: Parallelism,
) -> Result<Vec<FomRow>> {
    if sizes.is_empty() {
        return Err(Error::Config("object-size sweep needs at least one size".into()));
    }
    let mut buckets = sizes
        .iter()
        .map(|&(w, h)| setup.centered_slit(w, h))
        .collect::<Result<Vec<_>>>()?;
    buckets.push(setup.reference_bucket.clone());
    let mut acc = CorrAccumulator::new(source.width(), source.height(), setup.reference_roi, buckets)?;
    acc.accumulate_source(source, 0..source.len(), par)?;
    let mut rows = Vec::with_capacity(2 * sizes.len());
    for i in 0..sizes.len() {
        rows.extend(setup.rows(&acc, i, sizes.len())?);
    }
    Ok(rows)
}

/// GI and DGI figures of merit of `object` after the first N frames, for
/// each N in `checkpoints`. The accumulators are extended between
/// checkpoints, so the stack is read once.
pub fn sweep_frame_count<S: FrameSource + ?Sized>(
    source: &S,
    setup: &SweepSetup,
    object: &BucketSpec,
    checkpoints: &[usize],
    par: Parallelism,
) -> Result<Vec<FomRow>> {
    if checkpoints.is_empty() {
        return Err(Error::Config("frame-count sweep needs at least one checkpoint".into()));
    }
    if checkpoints[0] < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: checkpoints[0],
        });
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be strictly ascending".into()));
    }
    let last = *checkpoints.last().expect("non-empty");
    if last > source.len() {
        return Err(Error::TooFewFrames {
            needed: last,
            got: source.len(),
        });
    }
    let buckets = vec![object.clone(), setup.reference_bucket.clone()];
    let mut acc = CorrAccumulator::new(source.width(), source.height(), setup.reference_roi, buckets)?;
    let mut rows = Vec::with_capacity(2 * checkpoints.len());
    let mut done = 0;
    for &n in checkpoints {
        acc.accumulate_source(source, done..n, par)?;
        done = n;
        rows.extend(setup.rows(&acc, 0, 1)?);
    }
    Ok(rows)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = mid;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation, with ties given their mean rank.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config(
            "spearman_rho needs two equally long series of at least 2 values".into(),
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let m = (n + 1.0) / 2.0;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - m) * (b - m)).sum();
    let vx: f64 = rx.iter().map(|a| (a - m).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - m).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("a constant series has no rank correlation".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_known_values() {
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]).unwrap(), 1.0);
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // Ranks (1, 2, 3, 4) against (2, 1, 4, 3): 1 - 6·4/(4·15) = 0.6
        assert!((spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn slit_placement() {
        let setup = SweepSetup {
            bucket_roi: Roi::new(10, 10, 20, 30),
            reference_roi: Roi::new(0, 0, 64, 64),
            reference_bucket: BucketSpec::open(Roi::new(0, 0, 64, 64)).unwrap(),
            guard: 4,
            speckle_fwhm: 2.0,
        };
        let b = setup.centered_slit(4, 10).unwrap();
        assert_eq!(b.footprint(), Roi::new(18, 20, 4, 10));
        assert!(setup.centered_slit(21, 1).is_err());
        assert!((setup.speckle_area() - PI).abs() < 1e-15);
    }
}
