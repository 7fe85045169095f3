use serde::Serialize;

use crate::frame::Roi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Technique {
    #[serde(rename = "GI")]
    Gi,
    #[serde(rename = "DGI")]
    Dgi,
}

impl std::fmt::Display for Technique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Technique::Gi => "GI",
            Technique::Dgi => "DGI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrWarning {
    /// The DGI reference bucket sees part of the object image.
    ReferenceOverlapsObject,
}

/// Per-pixel normalised correlation over the reference region.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationImage {
    pub(crate) region: Roi,
    pub(crate) values: Vec<f64>,
    pub(crate) n_frames_used: usize,
    pub(crate) technique: Technique,
    pub(crate) excluded: Vec<(usize, usize)>,
    pub(crate) warnings: Vec<CorrWarning>,
}

impl CorrelationImage {
    /// Builds an image from explicit values (all finite).
    pub fn from_values(
        region: Roi,
        values: Vec<f64>,
        n_frames_used: usize,
        technique: Technique,
    ) -> crate::Result<Self> {
        if values.len() != region.area() {
            return Err(crate::Error::Config(format!(
                "correlation image needs {} values, got {}",
                region.area(),
                values.len()
            )));
        }
        let bad: Vec<(usize, usize)> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_finite())
            .map(|(i, _)| (i % region.width, i / region.width))
            .collect();
        if !bad.is_empty() {
            return Err(crate::Error::NonFinite(bad));
        }
        Ok(CorrelationImage {
            region,
            values,
            n_frames_used,
            technique,
            excluded: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.region.width
    }

    pub fn height(&self) -> usize {
        self.region.height
    }

    /// Where the image sits on the camera frame.
    pub fn region(&self) -> Roi {
        self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at image coordinates `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.region.width + x]
    }

    pub fn n_frames_used(&self) -> usize {
        self.n_frames_used
    }

    pub fn technique(&self) -> Technique {
        self.technique
    }

    /// Image coordinates of pixels left out because their mean intensity was zero.
    pub fn excluded_pixels(&self) -> &[(usize, usize)] {
        &self.excluded
    }

    pub fn warnings(&self) -> &[CorrWarning] {
        &self.warnings
    }

    /// Mean over a rectangle in image coordinates.
    pub fn mean_over(&self, roi: &Roi) -> f64 {
        let mut s = 0.0;
        for y in roi.y..roi.y_end() {
            s += self.values[y * self.width() + roi.x..y * self.width() + roi.x_end()]
                .iter()
                .sum::<f64>();
        }
        s / roi.area() as f64
    }
}
