use serde::Serialize;

use crate::error::{Error, Result};
use crate::gi::CorrelationImage;

/// Minimum section length accepted by [`resolution_r`].
pub const MIN_SECTION_LEN: usize = 5;

/// A 1-D cut through a correlation image.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionProfile {
    /// Image column of each sample.
    pub positions: Vec<usize>,
    pub values: Vec<f64>,
}

impl SectionProfile {
    pub fn new(positions: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::Config("section positions and values differ in length".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("SectionProfile::new", format!("non-finite value {v}")));
        }
        Ok(SectionProfile { positions, values })
    }

    /// Columns `x0..x1` averaged over rows `y0..y1` of the image.
    pub fn band(image: &CorrelationImage, x0: usize, x1: usize, y0: usize, y1: usize) -> Result<Self> {
        if !(x0 < x1 && x1 <= image.width() && y0 < y1 && y1 <= image.height()) {
            return Err(Error::OutOfBounds {
                what: "section band",
                x: x0,
                y: y0,
                width: x1.saturating_sub(x0),
                height: y1.saturating_sub(y0),
                frame_width: image.width(),
                frame_height: image.height(),
            });
        }
        let rows = (y1 - y0) as f64;
        let values = (x0..x1)
            .map(|x| (y0..y1).map(|y| image.get(x, y)).sum::<f64>() / rows)
            .collect();
        Self::new((x0..x1).collect(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The resolution parameter with the extrema it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolution {
    pub r: f64,
    pub mean_max: f64,
    pub mean_min: f64,
    /// Section indices of the maxima and minima used.
    pub maxima: Vec<usize>,
    pub minima: Vec<usize>,
}

/// Three-point moving mean; the end points average their two samples.
pub fn smooth3(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn prominence(s: &[f64], i: usize) -> f64 {
    let mut left = s[i];
    for &v in s[..i].iter().rev() {
        if v > s[i] {
            break;
        }
        left = left.min(v);
    }
    let mut right = s[i];
    for &v in &s[i + 1..] {
        if v > s[i] {
            break;
        }
        right = right.min(v);
    }
    s[i] - left.max(right)
}

/// (⟨max⟩ − ⟨min⟩)/(⟨max⟩ + ⟨min⟩) over the `n_slits` highest local maxima
/// and the minima between them.
///
/// Extrema are located on the three-point smoothed section; maxima need a
/// prominence of at least 10% of its range. Each value is then read from the
/// raw section as the largest (maxima) or smallest (minima) sample of the
/// three that were averaged at that point.
pub fn resolution_r(section: &SectionProfile, n_slits: usize) -> Result<Resolution> {
    let raw = &section.values;
    if raw.len() < MIN_SECTION_LEN {
        return Err(Error::Config(format!(
            "section has {} samples, at least {MIN_SECTION_LEN} are needed",
            raw.len()
        )));
    }
    if n_slits < 2 {
        return Err(Error::Config("resolution needs at least two slits".into()));
    }
    let s = smooth3(raw);
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let min_prominence = 0.1 * (hi - lo);
    let mut maxima: Vec<usize> = (1..s.len() - 1)
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
        .filter(|&i| hi > lo && prominence(&s, i) >= min_prominence)
        .collect();
    maxima.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    maxima.truncate(n_slits);
    maxima.sort_unstable();
    if maxima.len() < 2 {
        return Err(Error::Unresolved);
    }
    let minima: Vec<usize> = maxima
        .windows(2)
        .map(|p| {
            (p[0] + 1..p[1])
                .min_by(|&a, &b| s[a].total_cmp(&s[b]))
                .expect("maxima are separated")
        })
        .collect();
    let window = |i: usize| &raw[i - 1..=i + 1];
    let mean_max = maxima
        .iter()
        .map(|&i| window(i).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / maxima.len() as f64;
    let mean_min = minima
        .iter()
        .map(|&i| window(i).iter().copied().fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / minima.len() as f64;
    let den = mean_max + mean_min;
    if den == 0.0 {
        return Err(Error::domain("resolution_r", "extrema sum to zero"));
    }
    Ok(Resolution {
        r: (mean_max - mean_min) / den,
        mean_max,
        mean_min,
        maxima,
        minima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(values: &[f64]) -> SectionProfile {
        SectionProfile::new((0..values.len()).collect(), values.to_vec()).unwrap()
    }

    #[test]
    fn triangle_wave() {
        let s = section(&[1.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
        let r = resolution_r(&s, 2).unwrap();
        assert_eq!(r.maxima, vec![2, 6]);
        assert_eq!(r.minima, vec![4]);
        assert_eq!(r.r, 0.5);
    }

    #[test]
    fn three_slits_keep_top_maxima() {
        let mut v = vec![0.0; 30];
        for c in [5, 15, 25] {
            v[c - 2..=c + 2].fill(4.0);
        }
        v[10] = 0.5;
        v[20] = 0.5;
        let r = resolution_r(&section(&v), 3).unwrap();
        assert_eq!(r.maxima.len(), 3);
        assert_eq!(r.mean_max, 4.0);
        assert_eq!(r.mean_min, 0.0);
        assert_eq!(r.r, 1.0);
    }

    #[test]
    fn flat_or_monotone_is_unresolved() {
        assert!(matches!(resolution_r(&section(&[1.0; 8]), 2), Err(Error::Unresolved)));
        let ramp: Vec<f64> = (0..8).map(f64::from).collect();
        assert!(matches!(resolution_r(&section(&ramp), 2), Err(Error::Unresolved)));
        assert!(resolution_r(&section(&[1.0, 2.0, 1.0, 2.0]), 2).is_err());
    }

    #[test]
    fn small_bumps_are_ignored() {
        let v = [0.0, 10.0, 10.0, 10.0, 0.0, 0.0, 0.3, 0.0, 0.0, 10.0, 10.0, 10.0, 0.0];
        let r = resolution_r(&section(&v), 3).unwrap();
        assert_eq!(r.maxima.len(), 2);
    }
}
