//! Deterministic parallel folds over frame sources.
//!
//! Frames are cut into fixed-size chunks. Each chunk is folded sequentially
//! into its own partial state, and partial states are merged strictly in chunk
//! order. Neither the chunk boundaries nor the merge order depend on the
//! number of workers, so results are bit-identical for any worker count.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSource};

/// Frames folded into one partial state before merging.
pub const CHUNK_FRAMES: usize = 256;

/// Worker-pool size; `None` uses rayon's global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Parallelism {
    pub workers: Option<usize>,
}

impl Parallelism {
    pub const fn serial() -> Self {
        Parallelism { workers: Some(1) }
    }

    pub const fn workers(n: usize) -> Self {
        Parallelism { workers: Some(n) }
    }

    /// Runs `op` inside a pool of the requested size.
    pub fn install<R: Send>(&self, op: impl FnOnce() -> R + Send) -> Result<R> {
        match self.workers {
            None => Ok(op()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
                Ok(pool.install(op))
            }
        }
    }
}

/// Folds `range` of `source` with `step`, merging chunk partials in order.
///
/// `init` builds an empty partial state and `merge(acc, later)` must absorb a
/// partial that covers frames following those already in `acc`.
pub fn fold_frames<S, A, I, F, M>(
    source: &S,
    range: Range<usize>,
    par: Parallelism,
    init: I,
    step: F,
    mut merge: M,
) -> Result<A>
where
    S: FrameSource + ?Sized,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, usize, &Frame) -> Result<()> + Sync + Send,
    M: FnMut(&mut A, A) + Send,
{
    if range.end > source.len() {
        return Err(Error::TooFewFrames {
            needed: range.end,
            got: source.len(),
        });
    }
    let chunks: Vec<Range<usize>> = range
        .clone()
        .step_by(CHUNK_FRAMES)
        .map(|start| start..(start + CHUNK_FRAMES).min(range.end))
        .collect();
    let batch = 4 * rayon_threads(par).max(1);

    par.install(|| {
        let mut total = init();
        for group in chunks.chunks(batch) {
            let partials: Vec<Result<A>> = group
                .par_iter()
                .map(|chunk| {
                    let mut acc = init();
                    let mut buf = Frame::zeros(source.width(), source.height());
                    for i in chunk.clone() {
                        source.load(i, &mut buf)?;
                        step(&mut acc, i, &buf)?;
                    }
                    Ok(acc)
                })
                .collect();
            for p in partials {
                merge(&mut total, p?);
            }
        }
        Ok(total)
    })?
}

fn rayon_threads(par: Parallelism) -> usize {
    par.workers.unwrap_or_else(rayon::current_num_threads)
}

/// Calls `f(index, frame)` for every frame, in parallel, collecting outputs in
/// index order.
pub fn map_frames<S, T, F>(source: &S, range: Range<usize>, par: Parallelism, f: F) -> Result<Vec<T>>
where
    S: FrameSource + ?Sized,
    T: Send,
    F: Fn(usize, &Frame) -> Result<T> + Sync + Send,
{
    fold_frames(
        source,
        range,
        par,
        Vec::new,
        |acc: &mut Vec<T>, i, frame| {
            acc.push(f(i, frame)?);
            Ok(())
        },
        |acc, mut later| acc.append(&mut later),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{FrameStack, LightKind};

    fn ramp_stack(n: usize) -> FrameStack {
        let frames = (0..n)
            .map(|i| Frame::from_vec(3, 1, vec![i as f32 * 0.1, 1.0 / (i as f32 + 1.0), 2.0]).unwrap())
            .collect();
        FrameStack::new(3, 1, frames, 0, LightKind::Thermal).unwrap()
    }

    fn sum_of_squares(stack: &FrameStack, par: Parallelism) -> f64 {
        fold_frames(
            stack,
            0..stack.len(),
            par,
            || 0.0f64,
            |acc, _, f| {
                *acc += f.data().iter().map(|&v| (v as f64).powi(2)).sum::<f64>();
                Ok(())
            },
            |acc, b| *acc += b,
        )
        .unwrap()
    }

    #[test]
    fn identical_across_worker_counts() {
        let stack = ramp_stack(2000);
        let one = sum_of_squares(&stack, Parallelism::serial());
        let four = sum_of_squares(&stack, Parallelism::workers(4));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let stack = ramp_stack(700);
        let idx = map_frames(&stack, 0..700, Parallelism::workers(3), |i, _| Ok(i)).unwrap();
        assert_eq!(idx, (0..700).collect::<Vec<_>>());
    }

    #[test]
    fn range_past_end_fails() {
        let stack = ramp_stack(5);
        assert!(map_frames(&stack, 0..6, Parallelism::serial(), |i, _| Ok(i)).is_err());
    }
}
