//! Virtual pinhole in front of the second diffuser.

use crate::error::{Error, Result};
use crate::frame::ComplexField;
use crate::speckle::thermal::field_correlation;

/// Sub-samples per pixel side used to integrate pixel/disk overlaps.
const SUBSAMPLES: usize = 8;

/// A centred circular aperture on the first-stage grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinhole {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

impl Pinhole {
    /// Aperture centred on a `width`x`height` grid.
    pub fn centered(width: usize, height: usize, radius: f64) -> Self {
        Pinhole {
            center_x: (width as f64 - 1.0) / 2.0,
            center_y: (height as f64 - 1.0) / 2.0,
            radius,
        }
    }

    pub fn passes(&self, x: usize, y: usize) -> bool {
        let dx = x as f64 - self.center_x;
        let dy = y as f64 - self.center_y;
        dx * dx + dy * dy <= self.radius * self.radius
    }

    /// Nearest pixel to the point `(u, v)` given in units of the radius
    /// relative to the centre, or `None` if that pixel is blocked.
    pub fn sample_pixel(&self, u: f64, v: f64, width: usize, height: usize) -> Option<(usize, usize)> {
        let x = (self.center_x + u * self.radius).round();
        let y = (self.center_y + v * self.radius).round();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            return None;
        }
        let (x, y) = (x as usize, y as usize);
        self.passes(x, y).then_some((x, y))
    }
}

/// Zeroes `field` outside the pinhole. A radius at least the grid diagonal
/// leaves the field unchanged.
pub fn select_pinhole(field: &ComplexField, pinhole: &Pinhole) -> ComplexField {
    let mut out = field.clone();
    let w = field.width();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if !pinhole.passes(i % w, i / w) {
            *v = Default::default();
        }
    }
    out
}

/// Expected number of modes carried by the mean intensity of a physical
/// frame when the pinhole has the given radius.
///
/// Scatterers sample the first-stage field at uniformly distributed points
/// of the aperture. With `w_p` the probability of landing on open pixel `p`,
/// `m = Σ w_p` and `Q = Σ w_p w_q |γ_pq|²`, the frame mean has relative
/// variance `(2m - m² - Q)/(N m²) + Q/m²`.
pub fn expected_mode_count(
    radius: f64,
    width: usize,
    height: usize,
    first_stage_sigma: f64,
    n_scatterers: usize,
) -> f64 {
    let pinhole = Pinhole::centered(width, height, radius);
    let (weights, bw, bh) = hit_weights(&pinhole, width, height);
    let m: f64 = weights.iter().sum();
    if m <= 0.0 {
        return 0.0;
    }
    let gx: Vec<f64> = field_correlation(first_stage_sigma, width)
        .iter()
        .map(|g| g * g)
        .collect();
    let gy: Vec<f64> = field_correlation(first_stage_sigma, height)
        .iter()
        .map(|g| g * g)
        .collect();

    // Separable convolution of the weights with |γ|² restricted to the box.
    let mut along_x = vec![0.0; bw * bh];
    for r in 0..bh {
        let row = &weights[r * bw..(r + 1) * bw];
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        for c in 0..bw {
            along_x[r * bw + c] = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(c2, &v)| v * gx[(c as isize - c2 as isize).rem_euclid(width as isize) as usize])
                .sum();
        }
    }
    let mut q = 0.0;
    for r in 0..bh {
        for c in 0..bw {
            let wp = weights[r * bw + c];
            if wp == 0.0 {
                continue;
            }
            let conv: f64 = (0..bh)
                .map(|r2| along_x[r2 * bw + c] * gy[(r as isize - r2 as isize).rem_euclid(height as isize) as usize])
                .sum();
            q += wp * conv;
        }
    }
    let n = n_scatterers as f64;
    1.0 / ((2.0 * m - m * m - q) / (n * m * m) + q / (m * m))
}

/// Probability that a uniform point of the aperture rounds to each open
/// pixel, over the bounding box of the aperture, with the box size.
fn hit_weights(pinhole: &Pinhole, width: usize, height: usize) -> (Vec<f64>, usize, usize) {
    let r = pinhole.radius;
    let clamp = |v: f64, n: usize| v.max(0.0).min(n as f64 - 1.0) as usize;
    let x0 = clamp((pinhole.center_x - r).floor() - 1.0, width);
    let x1 = clamp((pinhole.center_x + r).ceil() + 1.0, width);
    let y0 = clamp((pinhole.center_y - r).floor() - 1.0, height);
    let y1 = clamp((pinhole.center_y + r).ceil() + 1.0, height);
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let disk_area = std::f64::consts::PI * r * r;
    let step = 1.0 / SUBSAMPLES as f64;
    let cell = step * step;
    let mut weights = vec![0.0; bw * bh];
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !pinhole.passes(x, y) {
                continue;
            }
            let mut inside = 0usize;
            for sy in 0..SUBSAMPLES {
                let py = y as f64 - 0.5 + (sy as f64 + 0.5) * step - pinhole.center_y;
                for sx in 0..SUBSAMPLES {
                    let px = x as f64 - 0.5 + (sx as f64 + 0.5) * step - pinhole.center_x;
                    if px * px + py * py <= r * r {
                        inside += 1;
                    }
                }
            }
            weights[(y - y0) * bw + (x - x0)] = inside as f64 * cell / disk_area;
        }
    }
    (weights, bw, bh)
}

/// Pinhole radius whose expected mode count equals `target`.
pub fn calibrate_pinhole_radius(
    target: f64,
    width: usize,
    height: usize,
    first_stage_sigma: f64,
    n_scatterers: usize,
) -> Result<f64> {
    let limit = width.min(height) as f64 / 2.0 - 1.0;
    let mu = |r: f64| expected_mode_count(r, width, height, first_stage_sigma, n_scatterers);
    if !target.is_finite() || mu(limit) < target {
        return Err(Error::PinholeTooLarge {
            target,
            radius: f64::INFINITY,
            limit,
        });
    }
    let mut lo = 0.75;
    if mu(lo) >= target {
        return Ok(lo);
    }
    let mut hi = limit;
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mu(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
