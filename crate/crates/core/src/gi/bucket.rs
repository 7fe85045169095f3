use crate::error::{Error, Result};
use crate::frame::{Frame, Roi};
use crate::masks::ObjectMask;

/// Region summed into a bucket value, optionally through an object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSpec {
    roi: Roi,
    mask: Option<ObjectMask>,
}

impl BucketSpec {
    pub fn new(roi: Roi, mask: Option<ObjectMask>) -> Result<Self> {
        if roi.width == 0 || roi.height == 0 {
            return Err(Error::Config("bucket region must be non-empty".into()));
        }
        if let Some(m) = &mask {
            m.check_fits(roi.width, roi.height)?;
        }
        Ok(BucketSpec { roi, mask })
    }

    /// An open (unmasked) bucket.
    pub fn open(roi: Roi) -> Result<Self> {
        Self::new(roi, None)
    }

    /// A bucket made of individual pixels.
    pub fn from_pixels(pixels: &[(usize, usize)]) -> Result<Self> {
        let (Some(x0), Some(y0)) = (pixels.iter().map(|p| p.0).min(), pixels.iter().map(|p| p.1).min()) else {
            return Err(Error::Config("pixel bucket needs at least one pixel".into()));
        };
        let x1 = pixels.iter().map(|p| p.0).max().unwrap_or(x0);
        let y1 = pixels.iter().map(|p| p.1).max().unwrap_or(y0);
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut data = vec![0u8; w * h];
        for &(x, y) in pixels {
            data[(y - y0) * w + (x - x0)] = 1;
        }
        let mask = ObjectMask::from_values(w, h, data)?;
        Self::new(Roi::new(x0, y0, w, h), Some(mask))
    }

    pub fn roi(&self) -> Roi {
        self.roi
    }

    pub fn mask(&self) -> Option<&ObjectMask> {
        self.mask.as_ref()
    }

    /// Rectangle of the frame through which light reaches the bucket.
    pub fn footprint(&self) -> Roi {
        match &self.mask {
            None => self.roi,
            Some(m) => Roi::new(self.roi.x + m.offset_x, self.roi.y + m.offset_y, m.width(), m.height()),
        }
    }

    /// Number of transmitting pixels.
    pub fn open_area(&self) -> usize {
        self.mask.as_ref().map_or(self.roi.area(), |m| m.transparent_count())
    }

    pub fn check_frame(&self, width: usize, height: usize) -> Result<()> {
        self.roi.check_within("bucket roi", width, height)
    }

    pub(crate) fn sum_unchecked(&self, frame: &Frame) -> f64 {
        match &self.mask {
            None => (self.roi.y..self.roi.y_end())
                .map(|y| {
                    frame.row(y)[self.roi.x..self.roi.x_end()]
                        .iter()
                        .map(|&v| v as f64)
                        .sum::<f64>()
                })
                .sum(),
            Some(m) => {
                let fp = self.footprint();
                let mut s = 0.0;
                for my in 0..m.height() {
                    let row = &frame.row(fp.y + my)[fp.x..fp.x + m.width()];
                    for (mx, &v) in row.iter().enumerate() {
                        if m.get(mx, my) == 1 {
                            s += v as f64;
                        }
                    }
                }
                s
            }
        }
    }
}

/// Σ over the bucket region of I·mask.
pub fn bucket_sum(frame: &Frame, bucket: &BucketSpec) -> Result<f64> {
    bucket.check_frame(frame.width(), frame.height())?;
    Ok(bucket.sum_unchecked(frame))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_bucket_of_ones() {
        let f = Frame::from_vec(30, 60, vec![1.0; 1800]).unwrap();
        let b = BucketSpec::open(Roi::new(5, 5, 20, 50)).unwrap();
        assert_eq!(bucket_sum(&f, &b).unwrap(), 1000.0);
    }

    #[test]
    fn diagonal_mask() {
        let f = Frame::from_vec(3, 3, (1..=9).map(|v| v as f32).collect()).unwrap();
        let m = ObjectMask::from_values(3, 3, vec![1, 0, 0, 0, 1, 0, 0, 0, 1]).unwrap();
        let b = BucketSpec::new(Roi::full(3, 3), Some(m)).unwrap();
        assert_eq!(bucket_sum(&f, &b).unwrap(), 15.0);
    }

    #[test]
    fn placed_mask_and_bounds() {
        let f = Frame::from_vec(4, 4, (0..16).map(|v| v as f32).collect()).unwrap();
        let m = ObjectMask::from_values(1, 2, vec![1, 1]).unwrap().placed_at(2, 1);
        let b = BucketSpec::new(Roi::new(1, 0, 3, 3), Some(m)).unwrap();
        // pixels (3,1) and (3,2)
        assert_eq!(bucket_sum(&f, &b).unwrap(), 7.0 + 11.0);
        assert!(bucket_sum(&Frame::zeros(3, 3), &b).is_err());
        let too_big = ObjectMask::from_values(2, 2, vec![1; 4]).unwrap().placed_at(2, 0);
        assert!(BucketSpec::new(Roi::new(0, 0, 3, 3), Some(too_big)).is_err());
    }

    #[test]
    fn pixel_bucket() {
        let f = Frame::from_vec(4, 4, (0..16).map(|v| v as f32).collect()).unwrap();
        let b = BucketSpec::from_pixels(&[(0, 0), (3, 3), (1, 2)]).unwrap();
        assert_eq!(bucket_sum(&f, &b).unwrap(), 0.0 + 15.0 + 9.0);
        assert_eq!(b.open_area(), 3);
    }
}
