//! Two-pass reconstructions: means first, then centred cross-moments, so
//! G = 1 + cov(S, I)/(⟨S⟩⟨I⟩).

use crate::error::{Error, Result};
use crate::frame::{FrameSource, Roi};
use crate::gi::accumulate::{make_image, overlap_warning};
use crate::gi::bucket::BucketSpec;
use crate::gi::image::{CorrelationImage, Technique};
use crate::pipeline::{fold_frames, Parallelism};

struct Means {
    s: Vec<f64>,
    i: Vec<f64>,
}

fn check<S: FrameSource + ?Sized>(source: &S, buckets: &[&BucketSpec], reference: Roi) -> Result<()> {
    if source.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: source.len(),
        });
    }
    reference.check_within("reference roi", source.width(), source.height())?;
    for b in buckets {
        b.check_frame(source.width(), source.height())?;
    }
    Ok(())
}

fn means<S: FrameSource + ?Sized>(
    source: &S,
    buckets: &[&BucketSpec],
    reference: Roi,
    par: Parallelism,
) -> Result<Means> {
    let n = source.len();
    let area = reference.area();
    let (s, i) = fold_frames(
        source,
        0..n,
        par,
        || (vec![0.0; buckets.len()], vec![0.0; area]),
        |(s, i), _, frame| {
            for (a, b) in s.iter_mut().zip(buckets) {
                *a += b.sum_unchecked(frame);
            }
            for r in 0..reference.height {
                let row = &frame.row(reference.y + r)[reference.x..reference.x_end()];
                for (a, &v) in i[r * reference.width..].iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
            Ok(())
        },
        |(s, i), (s2, i2)| {
            s.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
            i.iter_mut().zip(&i2).for_each(|(a, b)| *a += b);
        },
    )?;
    let nf = n as f64;
    Ok(Means {
        s: s.into_iter().map(|v| v / nf).collect(),
        i: i.into_iter().map(|v| v / nf).collect(),
    })
}

/// Normalised correlation images of each bucket, with zero-mean pixels listed.
fn correlate<S: FrameSource + ?Sized>(
    source: &S,
    buckets: &[&BucketSpec],
    reference: Roi,
    par: Parallelism,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    check(source, buckets, reference)?;
    let m = means(source, buckets, reference, par)?;
    if let Some(b) = m.s.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate(format!("bucket {b} has zero mean signal")));
    }
    let area = reference.area();
    let cov = fold_frames(
        source,
        0..source.len(),
        par,
        || vec![vec![0.0; area]; buckets.len()],
        |cov, _, frame| {
            for (c, (b, &ms)) in cov.iter_mut().zip(buckets.iter().zip(&m.s)) {
                let ds = b.sum_unchecked(frame) - ms;
                for r in 0..reference.height {
                    let row = &frame.row(reference.y + r)[reference.x..reference.x_end()];
                    let base = r * reference.width;
                    for (k, &v) in row.iter().enumerate() {
                        c[base + k] += ds * (v as f64 - m.i[base + k]);
                    }
                }
            }
            Ok(())
        },
        |cov, later| {
            for (a, b) in cov.iter_mut().zip(&later) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
        },
    )?;
    let n = source.len() as f64;
    let zero: Vec<usize> = (0..area).filter(|&p| !(m.i[p] > 0.0)).collect();
    let images = cov
        .iter()
        .zip(&m.s)
        .map(|(c, &ms)| {
            c.iter()
                .zip(&m.i)
                .map(|(&cv, &mi)| if mi > 0.0 { 1.0 + cv / n / (ms * mi) } else { 0.0 })
                .collect()
        })
        .collect();
    Ok((images, zero))
}

/// Ghost image ⟨S·I⟩/(⟨S⟩⟨I⟩) over `reference`.
pub fn gi_correlate<S: FrameSource + ?Sized>(
    source: &S,
    bucket: &BucketSpec,
    reference: Roi,
    par: Parallelism,
) -> Result<CorrelationImage> {
    let (mut images, zero) = correlate(source, &[bucket], reference, par)?;
    Ok(make_image(
        reference,
        images.remove(0),
        zero,
        source.len(),
        Technique::Gi,
        Vec::new(),
    ))
}

/// Differential ghost image: the GI image of the test bucket minus that of
/// the reference bucket, each normalised by its own means.
pub fn dgi_correlate<S: FrameSource + ?Sized>(
    source: &S,
    test: &BucketSpec,
    reference_bucket: &BucketSpec,
    reference: Roi,
    par: Parallelism,
) -> Result<CorrelationImage> {
    let (images, zero) = correlate(source, &[test, reference_bucket], reference, par)?;
    let values = images[0].iter().zip(&images[1]).map(|(a, b)| a - b).collect();
    Ok(make_image(
        reference,
        values,
        zero,
        source.len(),
        Technique::Dgi,
        overlap_warning(test, reference_bucket),
    ))
}
