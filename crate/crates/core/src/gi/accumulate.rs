use std::ops::Range;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSource, Roi};
use crate::gi::bucket::BucketSpec;
use crate::gi::image::{CorrWarning, CorrelationImage, Technique};
use crate::pipeline::{fold_frames, Parallelism};

/// Which buckets a correlation image is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Gi { bucket: usize },
    Dgi { test: usize, reference: usize },
}

/// Running first and mixed moments for any number of buckets against every
/// pixel of a reference region.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrAccumulator {
    frame_width: usize,
    frame_height: usize,
    reference: Roi,
    buckets: Vec<BucketSpec>,
    n: usize,
    sum_s: Vec<f64>,
    sum_i: Vec<f64>,
    sum_si: Vec<Vec<f64>>,
}

impl CorrAccumulator {
    pub fn new(frame_width: usize, frame_height: usize, reference: Roi, buckets: Vec<BucketSpec>) -> Result<Self> {
        reference.check_within("reference roi", frame_width, frame_height)?;
        if buckets.is_empty() {
            return Err(Error::Config("at least one bucket is required".into()));
        }
        for b in &buckets {
            b.check_frame(frame_width, frame_height)?;
        }
        let area = reference.area();
        Ok(CorrAccumulator {
            frame_width,
            frame_height,
            reference,
            n: 0,
            sum_s: vec![0.0; buckets.len()],
            sum_i: vec![0.0; area],
            sum_si: vec![vec![0.0; area]; buckets.len()],
            buckets,
        })
    }

    /// Empty accumulator with the same layout.
    pub fn empty_like(&self) -> Self {
        CorrAccumulator {
            n: 0,
            sum_s: vec![0.0; self.sum_s.len()],
            sum_i: vec![0.0; self.sum_i.len()],
            sum_si: vec![vec![0.0; self.sum_i.len()]; self.sum_si.len()],
            ..self.clone_layout()
        }
    }

    fn clone_layout(&self) -> Self {
        CorrAccumulator {
            frame_width: self.frame_width,
            frame_height: self.frame_height,
            reference: self.reference,
            buckets: self.buckets.clone(),
            n: 0,
            sum_s: Vec::new(),
            sum_i: Vec::new(),
            sum_si: Vec::new(),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n
    }

    pub fn buckets(&self) -> &[BucketSpec] {
        &self.buckets
    }

    pub fn reference(&self) -> Roi {
        self.reference
    }

    pub fn accumulate(&mut self, frame: &Frame) -> Result<()> {
        frame.check_dims(self.frame_width, self.frame_height)?;
        let s: Vec<f64> = self.buckets.iter().map(|b| b.sum_unchecked(frame)).collect();
        let Roi { x, y, width, height } = self.reference;
        for r in 0..height {
            let row = &frame.row(y + r)[x..x + width];
            let base = r * width;
            for (i, &v) in row.iter().enumerate() {
                self.sum_i[base + i] += v as f64;
            }
            for (b, &sb) in s.iter().enumerate() {
                let acc = &mut self.sum_si[b][base..base + width];
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += sb * v as f64;
                }
            }
        }
        for (a, v) in self.sum_s.iter_mut().zip(&s) {
            *a += v;
        }
        self.n += 1;
        Ok(())
    }

    /// Absorbs the sums of `other`, which must share the layout.
    pub fn merge(&mut self, other: &CorrAccumulator) -> Result<()> {
        if self.reference != other.reference
            || self.buckets != other.buckets
            || self.frame_width != other.frame_width
            || self.frame_height != other.frame_height
        {
            return Err(Error::Config("cannot merge accumulators with different layouts".into()));
        }
        self.n += other.n;
        add_into(&mut self.sum_s, &other.sum_s);
        add_into(&mut self.sum_i, &other.sum_i);
        for (a, b) in self.sum_si.iter_mut().zip(&other.sum_si) {
            add_into(a, b);
        }
        Ok(())
    }

    /// Accumulates frames `range` of `source` with a deterministic parallel fold.
    pub fn accumulate_source<S: FrameSource + ?Sized>(
        &mut self,
        source: &S,
        range: Range<usize>,
        par: Parallelism,
    ) -> Result<()> {
        let template = self.empty_like();
        let part = fold_frames(
            source,
            range,
            par,
            || template.clone(),
            |acc, _, frame| acc.accumulate(frame),
            |acc, later| {
                acc.merge(&later).expect("identical layouts");
            },
        )?;
        self.merge(&part)
    }

    fn check_bucket(&self, index: usize) -> Result<()> {
        if index >= self.buckets.len() {
            return Err(Error::Config(format!(
                "bucket index {index} out of range ({} buckets)",
                self.buckets.len()
            )));
        }
        Ok(())
    }

    /// ⟨S_b·I⟩/(⟨S_b⟩⟨I⟩) per pixel; zero-mean pixels are set to 0 and listed.
    fn normalized(&self, bucket: usize) -> Result<(Vec<f64>, Vec<usize>)> {
        let n = self.n as f64;
        let mean_s = self.sum_s[bucket] / n;
        if !(mean_s > 0.0) {
            return Err(Error::Degenerate(format!("bucket {bucket} has zero mean signal")));
        }
        let mut zero = Vec::new();
        let values = self.sum_si[bucket]
            .iter()
            .zip(&self.sum_i)
            .enumerate()
            .map(|(p, (&si, &i))| {
                if i > 0.0 {
                    (si / n) / (mean_s * (i / n))
                } else {
                    zero.push(p);
                    0.0
                }
            })
            .collect();
        Ok((values, zero))
    }

    pub fn finalize(&self, selection: Selection) -> Result<CorrelationImage> {
        if self.n < 2 {
            return Err(Error::TooFewFrames { needed: 2, got: self.n });
        }
        let (values, zero, technique, warnings) = match selection {
            Selection::Gi { bucket } => {
                self.check_bucket(bucket)?;
                let (v, z) = self.normalized(bucket)?;
                (v, z, Technique::Gi, Vec::new())
            }
            Selection::Dgi { test, reference } => {
                self.check_bucket(test)?;
                self.check_bucket(reference)?;
                let (t, z) = self.normalized(test)?;
                let (r, _) = self.normalized(reference)?;
                let v = t.iter().zip(&r).map(|(a, b)| a - b).collect();
                let warnings = overlap_warning(&self.buckets[test], &self.buckets[reference]);
                (v, z, Technique::Dgi, warnings)
            }
        };
        Ok(make_image(self.reference, values, zero, self.n, technique, warnings))
    }
}

pub(crate) fn overlap_warning(test: &BucketSpec, reference: &BucketSpec) -> Vec<CorrWarning> {
    if test.footprint().intersects(&reference.footprint()) {
        vec![CorrWarning::ReferenceOverlapsObject]
    } else {
        Vec::new()
    }
}

pub(crate) fn make_image(
    region: Roi,
    values: Vec<f64>,
    zero: Vec<usize>,
    n: usize,
    technique: Technique,
    warnings: Vec<CorrWarning>,
) -> CorrelationImage {
    CorrelationImage {
        region,
        values,
        n_frames_used: n,
        technique,
        excluded: zero.iter().map(|&p| (p % region.width, p / region.width)).collect(),
        warnings,
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
