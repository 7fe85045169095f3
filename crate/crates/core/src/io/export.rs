//! 16-bit graymap export with a sidecar holding the value range.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::gi::CorrelationImage;
use crate::io::pgm::{read_pgm, write_pgm, Graymap};

const LEVELS: f64 = 65535.0;

/// How values are mapped onto the 16-bit range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// The image minimum maps to 0 and its maximum to 65535.
    Linear,
    /// `min` maps to 0 and `max` to 65535; values outside are clipped.
    Fixed { min: f64, max: f64 },
}

/// Anything that can be rendered as a grayscale image.
pub trait ExportImage {
    fn dims(&self) -> (usize, usize);
    fn value_at(&self, index: usize) -> f64;
}

impl ExportImage for Frame {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn value_at(&self, index: usize) -> f64 {
        self.data()[index] as f64
    }
}

impl ExportImage for CorrelationImage {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn value_at(&self, index: usize) -> f64 {
        self.values()[index]
    }
}

/// Path of the sidecar written next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".scale");
    PathBuf::from(name)
}

/// Writes `image` as a 16-bit P5 graymap and its (min, max) range as text in
/// `<path>.scale`.
pub fn export_image<I: ExportImage + ?Sized>(image: &I, path: impl AsRef<Path>, scaling: Scaling) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = image.dims();
    let values: Vec<f64> = (0..w * h).map(|i| image.value_at(i)).collect();
    let bad: Vec<(usize, usize)> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| (i % w, i / w))
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonFinite(bad));
    }
    let (min, max) = match scaling {
        Scaling::Linear => values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }),
        Scaling::Fixed { min, max } => {
            if !(min.is_finite() && max.is_finite() && min <= max) {
                return Err(Error::Config(format!("invalid fixed export range [{min}, {max}]")));
            }
            (min, max)
        }
    };
    let span = max - min;
    let data = values
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - min) / span * LEVELS).round().clamp(0.0, LEVELS) as u16
            } else {
                0
            }
        })
        .collect();
    write_pgm(
        path,
        &Graymap {
            width: w,
            height: h,
            max_value: 65535,
            data,
        },
    )?;
    let sidecar = sidecar_path(path);
    fs::write(&sidecar, format!("min {min:?}\nmax {max:?}\n")).map_err(|e| Error::io(&sidecar, e))
}

/// Reads an exported image back into values using its sidecar range.
pub fn read_exported(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let map = read_pgm(path)?;
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let field = |key: &str| -> Result<f64> {
        text.lines()
            .filter_map(|l| l.strip_prefix(key))
            .find_map(|rest| rest.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}: missing `{key}` entry", sidecar.display())))
    };
    let (min, max) = (field("min ")?, field("max ")?);
    let top = map.max_value as f64;
    let values = map.data.iter().map(|&q| min + q as f64 / top * (max - min)).collect();
    Ok((map.width, map.height, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let f = Frame::from_vec(3, 2, vec![2.5; 6]).unwrap();
        export_image(&f, &path, Scaling::Linear).unwrap();
        let map = read_pgm(&path).unwrap();
        assert!(map.data.iter().all(|&v| v == 0));
        assert_eq!(fs::read_to_string(sidecar_path(&path)).unwrap(), "min 2.5\nmax 2.5\n");
        assert_eq!(read_exported(&path).unwrap().2, vec![2.5; 6]);
    }

    #[test]
    fn linear_ends_and_fixed_clipping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.pgm");
        let f = CorrelationImage::from_values(
            crate::Roi::new(0, 0, 3, 1),
            vec![-1.0, 0.5, 2.0],
            2,
            crate::gi::Technique::Dgi,
        )
        .unwrap();
        export_image(&f, &path, Scaling::Linear).unwrap();
        assert_eq!(read_pgm(&path).unwrap().data, vec![0, 32768, 65535]);
        export_image(&f, &path, Scaling::Fixed { min: 0.0, max: 1.0 }).unwrap();
        assert_eq!(read_pgm(&path).unwrap().data, vec![0, 32768, 65535]);
    }

    #[test]
    fn non_finite_lists_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let img =
            CorrelationImage::from_values(crate::Roi::new(0, 0, 2, 1), vec![1.0, 2.0], 2, crate::gi::Technique::Gi)
                .unwrap();
        export_image(&img, dir.path().join("ok.pgm"), Scaling::Linear).unwrap();
        let f = Frame::zeros(2, 2);
        struct Bad(Frame);
        impl ExportImage for Bad {
            fn dims(&self) -> (usize, usize) {
                self.0.dims()
            }
            fn value_at(&self, i: usize) -> f64 {
                if i == 3 {
                    f64::NAN
                } else {
                    0.0
                }
            }
        }
        match export_image(&Bad(f), dir.path().join("b.pgm"), Scaling::Linear) {
            Err(Error::NonFinite(px)) => assert_eq!(px, vec![(1, 1)]),
            other => panic!("{other:?}"),
        }
    }
}
