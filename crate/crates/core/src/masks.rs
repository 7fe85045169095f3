//! Binary transmission objects placed in the test arm.

use crate::error::{Error, Result};
use crate::frame::{Frame, Roi};

/// Binary mask: 1 transmits, 0 blocks. `offset_x`/`offset_y` place it inside
/// a bucket region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
    pub offset_x: usize,
    pub offset_y: usize,
}

impl ObjectMask {
    /// Builds a mask from 0/1 values; at least one must be transparent.
    pub fn from_values(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "mask dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Config(format!(
                "mask buffer holds {} values, {width}x{height} needs {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Config(format!("mask values must be 0 or 1, found {v}")));
        }
        if !data.contains(&1) {
            return Err(Error::Config("mask has no transparent pixel".into()));
        }
        Ok(ObjectMask {
            width,
            height,
            data,
            offset_x: 0,
            offset_y: 0,
        })
    }

    /// Thresholds gray levels at half of `max_value`.
    pub fn from_gray(width: usize, height: usize, gray: &[u16], max_value: u16) -> Result<Self> {
        let threshold = (max_value as u32).div_ceil(2);
        let data = gray.iter().map(|&g| u8::from(g as u32 >= threshold)).collect();
        Self::from_values(width, height, data)
    }

    pub fn placed_at(mut self, x: usize, y: usize) -> Self {
        self.offset_x = x;
        self.offset_y = y;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn transparent_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Footprint relative to the region the mask is placed in.
    pub fn footprint(&self) -> Roi {
        Roi::new(self.offset_x, self.offset_y, self.width, self.height)
    }

    /// Fails unless the placed mask fits in a `width`x`height` region.
    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        self.footprint().check_within("object mask", width, height)
    }

    /// Sum of the values of each column.
    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.width)
            .map(|x| (0..self.height).map(|y| self.get(x, y) as usize).sum())
            .collect()
    }
}

/// A fully transparent rectangle.
pub fn slit_mask(width: usize, height: usize) -> Result<ObjectMask> {
    if width == 0 || height == 0 {
        return Err(Error::Config(format!(
            "slit dimensions must be non-zero, got {width}x{height}"
        )));
    }
    ObjectMask::from_values(width, height, vec![1; width * height])
}

/// `n_slits` vertical bars of `slit_width`x`slit_height` separated by
/// `separation` opaque columns.
pub fn multi_slit_mask(n_slits: usize, slit_width: usize, slit_height: usize, separation: usize) -> Result<ObjectMask> {
    if n_slits < 2 {
        return Err(Error::Config(format!(
            "a multi-slit mask needs at least 2 slits, got {n_slits}"
        )));
    }
    if separation == 0 {
        return Err(Error::Config("slit separation must be at least 1 px".into()));
    }
    if slit_width == 0 || slit_height == 0 {
        return Err(Error::Config("slit dimensions must be non-zero".into()));
    }
    let width = n_slits * slit_width + (n_slits - 1) * separation;
    let row: Vec<u8> = (0..width)
        .map(|x| u8::from(x % (slit_width + separation) < slit_width))
        .collect();
    let data = row.iter().copied().cycle().take(width * slit_height).collect();
    ObjectMask::from_values(width, slit_height, data)
}

/// Multiplies `frame` by `mask` inside the footprint at (`x`, `y`).
pub fn apply_mask(frame: &Frame, mask: &ObjectMask, x: usize, y: usize) -> Result<Frame> {
    Roi::new(x, y, mask.width, mask.height).check_within("object mask", frame.width(), frame.height())?;
    let mut out = frame.clone();
    let w = frame.width();
    let data = out.data_mut();
    for my in 0..mask.height {
        for mx in 0..mask.width {
            if mask.get(mx, my) == 0 {
                data[(y + my) * w + x + mx] = 0.0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slit_counts() {
        assert_eq!(slit_mask(20, 50).unwrap().transparent_count(), 1000);
        assert_eq!(slit_mask(1, 1).unwrap().transparent_count(), 1);
        assert!(slit_mask(0, 3).is_err());
    }

    #[test]
    fn three_slits() {
        let m = multi_slit_mask(3, 10, 40, 2).unwrap();
        assert_eq!(m.width(), 34);
        assert_eq!(m.transparent_count(), 1200);
        let m = multi_slit_mask(2, 1, 1, 1).unwrap();
        assert_eq!(m.values(), &[1, 0, 1]);
        let m = multi_slit_mask(3, 2, 3, 4).unwrap();
        assert_eq!(m.column_sums(), vec![3, 3, 0, 0, 0, 0, 3, 3, 0, 0, 0, 0, 3, 3]);
        assert!(multi_slit_mask(1, 2, 2, 1).is_err());
        assert!(multi_slit_mask(2, 2, 2, 0).is_err());
    }

    #[test]
    fn apply_checkerboard() {
        let f = Frame::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = ObjectMask::from_values(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(apply_mask(&f, &m, 0, 0).unwrap().data(), &[1.0, 0.0, 0.0, 4.0]);
        assert!(apply_mask(&f, &m, 1, 0).is_err());
    }

    #[test]
    fn opaque_footprint_zeroes_inside_only() {
        let f = Frame::from_vec(3, 2, vec![1.0; 6]).unwrap();
        let m = ObjectMask::from_values(2, 1, vec![1, 0]).unwrap();
        let out = apply_mask(&f, &m, 1, 1).unwrap();
        assert_eq!(out.data(), &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn gray_threshold() {
        let m = ObjectMask::from_gray(4, 1, &[0, 127, 128, 255], 255).unwrap();
        assert_eq!(m.values(), &[0, 0, 1, 1]);
        assert!(ObjectMask::from_values(2, 1, vec![0, 0]).is_err());
        assert!(ObjectMask::from_values(2, 1, vec![0, 2]).is_err());
    }
}
