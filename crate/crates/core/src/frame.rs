//! Intensity frames, frame stacks and the random-access frame source used by
//! every streaming analysis.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};

/// Kind of light a stack was produced from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightKind {
    /// Single diffuser (pseudo-thermal).
    Thermal,
    /// Two diffusers in sequence (speckled speckle).
    Superthermal,
    /// Camera images read from disk.
    Ingested,
}

impl LightKind {
    pub fn code(self) -> u8 {
        match self {
            LightKind::Thermal => 0,
            LightKind::Superthermal => 1,
            LightKind::Ingested => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LightKind::Thermal),
            1 => Some(LightKind::Superthermal),
            2 => Some(LightKind::Ingested),
            _ => None,
        }
    }
}

impl std::fmt::Display for LightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LightKind::Thermal => "thermal",
            LightKind::Superthermal => "superthermal",
            LightKind::Ingested => "ingested",
        })
    }
}

impl std::str::FromStr for LightKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "thermal" => Ok(LightKind::Thermal),
            "superthermal" => Ok(LightKind::Superthermal),
            "ingested" => Ok(LightKind::Ingested),
            other => Err(Error::Config(format!("unknown light kind `{other}`"))),
        }
    }
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub const fn new(x: usize, y: usize, width: usize, height: usize) -> Self {
        Roi { x, y, width, height }
    }

    pub const fn full(width: usize, height: usize) -> Self {
        Roi::new(0, 0, width, height)
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn x_end(&self) -> usize {
        self.x + self.width
    }

    pub fn y_end(&self) -> usize {
        self.y + self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x_end() && y >= self.y && y < self.y_end()
    }

    pub fn intersects(&self, other: &Roi) -> bool {
        self.x < other.x_end() && other.x < self.x_end() && self.y < other.y_end() && other.y < self.y_end()
    }

    /// Fails unless the rectangle is non-empty and fits in a `width`x`height` frame.
    pub fn check_within(&self, what: &'static str, width: usize, height: usize) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.x_end() > width || self.y_end() > height {
            return Err(Error::OutOfBounds {
                what,
                x: self.x,
                y: self.y,
                width: self.width,
                height: self.height,
                frame_width: width,
                frame_height: height,
            });
        }
        Ok(())
    }
}

/// Non-negative intensity image stored row-major in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Frame {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Builds a frame, rejecting negative or non-finite values.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Config(format!(
                "frame buffer holds {} values, {}x{} needs {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(
                "Frame::from_vec",
                format!(
                    "pixel ({}, {}) = {} is not a finite non-negative intensity",
                    i % width,
                    i / width,
                    data[i]
                ),
            ));
        }
        Ok(Frame { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Multiplies every pixel by `factor` (which must be positive).
    pub fn scaled(&self, factor: f32) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::Dimensions {
                expected_width: width,
                expected_height: height,
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    pub(crate) fn resize_to(&mut self, width: usize, height: usize) {
        self.width = width;
        self.height = height;
        self.data.resize(width * height, 0.0);
    }
}

/// Complex amplitude field on a pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    width: usize,
    height: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(width: usize, height: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Config(format!(
                "field buffer holds {} values, {}x{} needs {}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::domain("ComplexField::new", "non-finite amplitude"));
        }
        Ok(ComplexField { width, height, data })
    }

    /// A field of constant amplitude.
    pub fn uniform(width: usize, height: usize, amplitude: Complex64) -> Self {
        ComplexField {
            width,
            height,
            data: vec![amplitude; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        self.data[y * self.width + x]
    }

    /// |E|² as a frame.
    pub fn intensity(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.norm_sqr() as f32).collect(),
        }
    }
}

/// Bucket-side and reference-side rectangles of a two-portion camera image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArmLayout {
    pub bucket: Roi,
    pub reference: Roi,
}

/// An in-memory stack of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    width: usize,
    height: usize,
    frames: Vec<Frame>,
    pub master_seed: u64,
    pub light_kind: LightKind,
    pub arm_layout: Option<ArmLayout>,
}

impl FrameStack {
    pub fn new(
        width: usize,
        height: usize,
        frames: Vec<Frame>,
        master_seed: u64,
        light_kind: LightKind,
    ) -> Result<Self> {
        for f in &frames {
            f.check_dims(width, height)?;
        }
        Ok(FrameStack {
            width,
            height,
            frames,
            master_seed,
            light_kind,
            arm_layout: None,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn push(&mut self, frame: Frame) -> Result<()> {
        frame.check_dims(self.width, self.height)?;
        self.frames.push(frame);
        Ok(())
    }

    /// A copy with every frame multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> FrameStack {
        FrameStack {
            frames: self.frames.iter().map(|f| f.scaled(factor)).collect(),
            ..self.clone()
        }
    }
}

/// Random-access provider of frames.
///
/// Streaming analyses pull frames by index into a caller-owned buffer, so a
/// stack never has to be resident in memory. Implementations must return the
/// same frame for the same index on every call.
pub trait FrameSource: Sync {
    fn width(&self) -> usize;
    fn height(&self) -> usize;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes frame `index` into `buf`, resizing it as needed.
    fn load(&self, index: usize, buf: &mut Frame) -> Result<()>;
}

impl FrameSource for FrameStack {
    fn width(&self) -> usize {
        self.width
    }

    fn height(&self) -> usize {
        self.height
    }

    fn len(&self) -> usize {
        self.frames.len()
    }

    fn load(&self, index: usize, buf: &mut Frame) -> Result<()> {
        let frame = self.frames.get(index).ok_or(crate::error::FormatError::FrameIndex {
            index,
            count: self.frames.len(),
        })?;
        buf.clone_from(frame);
        Ok(())
    }
}

impl<S: FrameSource + ?Sized> FrameSource for &S {
    fn width(&self) -> usize {
        (**self).width()
    }

    fn height(&self) -> usize {
        (**self).height()
    }

    fn len(&self) -> usize {
        (**self).len()
    }

    fn load(&self, index: usize, buf: &mut Frame) -> Result<()> {
        (**self).load(index, buf)
    }
}

/// The first `len` frames of another source.
pub struct Prefix<S> {
    inner: S,
    len: usize,
}

impl<S: FrameSource> Prefix<S> {
    pub fn new(inner: S, len: usize) -> Self {
        let len = len.min(inner.len());
        Prefix { inner, len }
    }
}

impl<S: FrameSource> FrameSource for Prefix<S> {
    fn width(&self) -> usize {
        self.inner.width()
    }

    fn height(&self) -> usize {
        self.inner.height()
    }

    fn len(&self) -> usize {
        self.len
    }

    fn load(&self, index: usize, buf: &mut Frame) -> Result<()> {
        if index >= self.len {
            return Err(crate::error::FormatError::FrameIndex { index, count: self.len }.into());
        }
        self.inner.load(index, buf)
    }
}
