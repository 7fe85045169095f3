//! Half-maximum crossings on sampled 1-D profiles.

/// Distance from index 0 to the first downward crossing of `level`, with
/// linear interpolation between the two bracketing samples.
///
/// `None` if the profile never drops below `level`, or starts below it.
pub fn crossing_distance(values: &[f64], level: f64) -> Option<f64> {
    let first = *values.first()?;
    if !(first >= level) {
        return None;
    }
    for i in 1..values.len() {
        let (a, b) = (values[i - 1], values[i]);
        if b < level {
            return Some((i - 1) as f64 + (a - level) / (a - b));
        }
    }
    None
}

/// Full width at `level` of a peak at `center`, crossing left and right.
pub fn full_width(values: &[f64], center: usize, level: f64) -> Option<f64> {
    let right = crossing_distance(&values[center..], level)?;
    let left_side: Vec<f64> = values[..=center].iter().rev().copied().collect();
    let left = crossing_distance(&left_side, level)?;
    Some(left + right)
}
