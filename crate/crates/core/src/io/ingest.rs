//! Ingestion of directories of grayscale camera images.
//!
//! Files are taken in lexicographic order of their names. `.pgm` files are
//! read directly; `.png` and `.tif`/`.tiff` go through the `image` crate.
//! Every image must be single-channel 8- or 16-bit with the same size and
//! depth as the first; all offenders are reported together.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, IngestIssue, Result};
use crate::frame::{ArmLayout, Frame, FrameStack, LightKind};
use crate::io::pgm::read_pgm;
use crate::io::spks::StackWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    width: usize,
    height: usize,
    bits: u8,
}

/// Lists the image files of `dir` in lexicographic order.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Ingest(vec![IngestIssue {
            path: dir.to_path_buf(),
            reason: "directory contains no images".into(),
        }]));
    }
    Ok(paths)
}

fn decode(path: &Path) -> std::result::Result<(Shape, Vec<f32>), String> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => {
            let map = read_pgm(path).map_err(|e| e.to_string())?;
            let shape = Shape {
                width: map.width,
                height: map.height,
                bits: map.bit_depth(),
            };
            Ok((shape, map.data.iter().map(|&v| v as f32).collect()))
        }
        "png" | "tif" | "tiff" => {
            let img = image::open(path).map_err(|e| e.to_string())?;
            let (width, height) = (img.width() as usize, img.height() as usize);
            match img {
                image::DynamicImage::ImageLuma8(b) => Ok((
                    Shape { width, height, bits: 8 },
                    b.into_raw().into_iter().map(f32::from).collect(),
                )),
                image::DynamicImage::ImageLuma16(b) => Ok((
                    Shape {
                        width,
                        height,
                        bits: 16,
                    },
                    b.into_raw().into_iter().map(f32::from).collect(),
                )),
                other => Err(format!("not single-channel 8/16-bit grayscale ({:?})", other.color())),
            }
        }
        _ => Err(format!("unsupported file type `{ext}`")),
    }
}

fn shape_issue(first: Shape, got: Shape) -> Option<String> {
    if (got.width, got.height) != (first.width, first.height) {
        Some(format!(
            "size {}x{} differs from {}x{}",
            got.width, got.height, first.width, first.height
        ))
    } else if got.bits != first.bits {
        Some(format!("bit depth {} differs from {}", got.bits, first.bits))
    } else {
        None
    }
}

fn check_layout(layout: Option<ArmLayout>, shape: Shape) -> Result<()> {
    if let Some(l) = layout {
        l.bucket.check_within("bucket arm", shape.width, shape.height)?;
        l.reference.check_within("reference arm", shape.width, shape.height)?;
    }
    Ok(())
}

/// Visits every image in order, calling `sink` with the decoded frames once
/// the first image has fixed the expected shape.
fn ingest_with(dir: &Path, mut sink: impl FnMut(Shape, Frame) -> Result<()>) -> Result<usize> {
    let paths = list_images(dir)?;
    let mut issues = Vec::new();
    let mut first: Option<Shape> = None;
    for path in &paths {
        match decode(path) {
            Ok((shape, data)) => {
                let reference = *first.get_or_insert(shape);
                if let Some(reason) = shape_issue(reference, shape) {
                    issues.push(IngestIssue {
                        path: path.clone(),
                        reason,
                    });
                } else if issues.is_empty() {
                    sink(shape, Frame::from_vec(shape.width, shape.height, data)?)?;
                }
            }
            Err(reason) => issues.push(IngestIssue {
                path: path.clone(),
                reason,
            }),
        }
    }
    if issues.is_empty() {
        Ok(paths.len())
    } else {
        Err(Error::Ingest(issues))
    }
}

/// Loads a directory of images into a stack of ingested frames; pixel
/// values are the raw integer levels.
pub fn ingest_images(dir: impl AsRef<Path>, arm_layout: Option<ArmLayout>) -> Result<FrameStack> {
    let mut frames = Vec::new();
    let mut shape = None;
    ingest_with(dir.as_ref(), |s, f| {
        if shape.is_none() {
            check_layout(arm_layout, s)?;
            shape = Some(s);
        }
        frames.try_reserve(1).map_err(|_| Error::ResourceExhausted {
            frame_index: frames.len(),
        })?;
        frames.push(f);
        Ok(())
    })?;
    let s = shape.expect("at least one image");
    let mut stack = FrameStack::new(s.width, s.height, frames, 0, LightKind::Ingested)?;
    stack.arm_layout = arm_layout;
    Ok(stack)
}

/// Streams a directory of images into an SPKS file without holding the
/// frames in memory. On failure the partial output is removed.
pub fn ingest_to_file(dir: impl AsRef<Path>, arm_layout: Option<ArmLayout>, out: impl AsRef<Path>) -> Result<usize> {
    let out = out.as_ref();
    let mut writer: Option<StackWriter> = None;
    let result = ingest_with(dir.as_ref(), |s, f| {
        if writer.is_none() {
            check_layout(arm_layout, s)?;
            writer = Some(StackWriter::create(
                out,
                s.width,
                s.height,
                LightKind::Ingested,
                0,
                arm_layout,
            )?);
        }
        writer.as_mut().expect("writer").push(&f)
    });
    match result {
        Ok(n) => {
            writer.expect("at least one image").finish()?;
            Ok(n)
        }
        Err(e) => {
            drop(writer);
            let _ = fs::remove_file(out);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::pgm::{write_pgm, Graymap};

    fn gray(dir: &Path, name: &str, w: usize, h: usize, max_value: u16, seed: u16) {
        let data = (0..w * h)
            .map(|i| (i as u16 * 7 + seed) % (max_value.min(255) + 1))
            .collect();
        write_pgm(
            dir.join(name),
            &Graymap {
                width: w,
                height: h,
                max_value,
                data,
            },
        )
        .unwrap();
    }

    #[test]
    fn three_images_in_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, seed) in [("b.pgm", 2), ("a.pgm", 1), ("c.pgm", 3)] {
            gray(dir.path(), name, 4, 3, 255, seed);
        }
        let stack = ingest_images(dir.path(), None).unwrap();
        assert_eq!(stack.frames().len(), 3);
        assert_eq!(stack.light_kind, LightKind::Ingested);
        assert_eq!(stack.frames()[0].get(0, 0), 1.0);
        assert_eq!(stack.frames()[2].get(0, 0), 3.0);
        assert!(stack
            .frames()
            .iter()
            .all(|f| f.data().iter().all(|&v| (0.0..=255.0).contains(&v))));
    }

    #[test]
    fn empty_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(ingest_images(dir.path(), None), Err(Error::Ingest(_))));
    }

    #[test]
    fn offenders_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        gray(dir.path(), "a.pgm", 4, 3, 255, 0);
        gray(dir.path(), "b.pgm", 5, 3, 255, 0);
        gray(dir.path(), "c.pgm", 4, 3, 65535, 0);
        fs::write(dir.path().join("d.txt"), "x").unwrap();
        match ingest_images(dir.path(), None) {
            Err(Error::Ingest(issues)) => {
                let names: Vec<_> = issues.iter().map(|i| i.path.file_name().unwrap().to_owned()).collect();
                assert_eq!(names, ["b.pgm", "c.pgm", "d.txt"]);
            }
            other => panic!("{other:?}"),
        }
    }
}
