//! Ghost imaging (GI) and differential ghost imaging (DGI) reconstruction.
//!
//! In simulation the same frame feeds both arms: the bucket sums the frame
//! through the object mask, the reference arm sees the whole frame.

mod accumulate;
mod batch;
mod bucket;
mod image;

pub use accumulate::{CorrAccumulator, Selection};
pub use batch::{dgi_correlate, gi_correlate};
pub use bucket::{bucket_sum, BucketSpec};
pub use image::{CorrWarning, CorrelationImage, Technique};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Frame, FrameStack, LightKind, Roi};
    use crate::pipeline::Parallelism;

    fn toy() -> FrameStack {
        let frames = vec![
            Frame::from_vec(2, 1, vec![1.0, 2.0]).unwrap(),
            Frame::from_vec(2, 1, vec![3.0, 1.0]).unwrap(),
        ];
        FrameStack::new(2, 1, frames, 0, LightKind::Ingested).unwrap()
    }

    #[test]
    fn two_frame_toy() {
        let stack = toy();
        let bucket = BucketSpec::open(Roi::new(0, 0, 1, 1)).unwrap();
        let g = gi_correlate(&stack, &bucket, Roi::new(1, 0, 1, 1), Parallelism::serial()).unwrap();
        assert!((g.get(0, 0) - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_frame_toy_dgi() {
        // S_t = pixel 0, S_r = pixel 0 + pixel 1 = [3, 4]; reference pixel 1.
        // ⟨S_r I⟩ = (6 + 4)/2 = 5, ⟨S_r⟩ = 3.5, ⟨I⟩ = 1.5
        let stack = toy();
        let t = BucketSpec::open(Roi::new(0, 0, 1, 1)).unwrap();
        let r = BucketSpec::open(Roi::full(2, 1)).unwrap();
        let expected = 2.5 / 3.0 - 5.0 / (3.5 * 1.5);
        let g = dgi_correlate(&stack, &t, &r, Roi::new(1, 0, 1, 1), Parallelism::serial()).unwrap();
        assert!((g.get(0, 0) - expected).abs() < 1e-12);
        assert_eq!(g.warnings(), &[CorrWarning::ReferenceOverlapsObject]);
        let mut acc = CorrAccumulator::new(2, 1, Roi::new(1, 0, 1, 1), vec![t, r]).unwrap();
        for f in stack.frames() {
            acc.accumulate(f).unwrap();
        }
        let s = acc.finalize(Selection::Dgi { test: 0, reference: 1 }).unwrap();
        assert!((s.get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_buckets_cancel() {
        let frames = (0..6)
            .map(|k| Frame::from_vec(3, 2, (0..6).map(|i| ((i * 5 + k * 7) % 9 + 1) as f32).collect()).unwrap())
            .collect();
        let stack = FrameStack::new(3, 2, frames, 0, LightKind::Ingested).unwrap();
        let b = BucketSpec::open(Roi::full(3, 2)).unwrap();
        let g = dgi_correlate(&stack, &b, &b, Roi::full(3, 2), Parallelism::serial()).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_frames_give_unity() {
        let frames = (0..4).map(|_| Frame::from_vec(3, 3, vec![2.0; 9]).unwrap()).collect();
        let stack = FrameStack::new(3, 3, frames, 0, LightKind::Ingested).unwrap();
        let b = BucketSpec::open(Roi::new(0, 0, 2, 2)).unwrap();
        let g = gi_correlate(&stack, &b, Roi::full(3, 3), Parallelism::serial()).unwrap();
        assert!(g.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn zero_mean_pixels_are_excluded() {
        let frames = vec![
            Frame::from_vec(2, 1, vec![1.0, 0.0]).unwrap(),
            Frame::from_vec(2, 1, vec![2.0, 0.0]).unwrap(),
        ];
        let stack = FrameStack::new(2, 1, frames, 0, LightKind::Ingested).unwrap();
        let b = BucketSpec::open(Roi::new(0, 0, 1, 1)).unwrap();
        let g = gi_correlate(&stack, &b, Roi::full(2, 1), Parallelism::serial()).unwrap();
        assert_eq!(g.excluded_pixels(), &[(1, 0)]);
        assert_eq!(g.get(1, 0), 0.0);
        let dark = BucketSpec::open(Roi::new(1, 0, 1, 1)).unwrap();
        assert!(gi_correlate(&stack, &dark, Roi::full(2, 1), Parallelism::serial()).is_err());
    }

    #[test]
    fn accumulator_edge_cases() {
        let b = BucketSpec::open(Roi::new(0, 0, 1, 1)).unwrap();
        let mut acc = CorrAccumulator::new(2, 1, Roi::full(2, 1), vec![b]).unwrap();
        acc.accumulate(&Frame::from_vec(2, 1, vec![1.0, 1.0]).unwrap()).unwrap();
        assert!(matches!(
            acc.finalize(Selection::Gi { bucket: 0 }),
            Err(crate::Error::TooFewFrames { .. })
        ));
        assert!(acc.accumulate(&Frame::zeros(3, 1)).is_err());
        acc.accumulate(&Frame::from_vec(2, 1, vec![2.0, 1.0]).unwrap()).unwrap();
        assert!(acc.finalize(Selection::Gi { bucket: 1 }).is_err());
    }
}
