//! Binary portable graymaps (P5), 8- and 16-bit.

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::masks::ObjectMask;

/// A decoded graymap. 16-bit samples are stored big-endian on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub data: Vec<u16>,
}

impl Graymap {
    pub fn bit_depth(&self) -> u8 {
        if self.max_value > 255 {
            16
        } else {
            8
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.max_value).into_bytes();
        if self.max_value > 255 {
            for v in &self.data {
                out.extend_from_slice(&v.to_be_bytes());
            }
        } else {
            out.extend(self.data.iter().map(|&v| v as u8));
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let bad = |m: &str| FormatError::Graymap(m.to_string());
        let mut pos = 0;
        let token = |pos: &mut usize| -> Result<String, FormatError> {
            loop {
                match bytes.get(*pos) {
                    Some(b'#') => {
                        while bytes.get(*pos).is_some_and(|&c| c != b'\n') {
                            *pos += 1;
                        }
                    }
                    Some(c) if c.is_ascii_whitespace() => *pos += 1,
                    Some(_) => break,
                    None => return Err(bad("unexpected end of header")),
                }
            }
            let start = *pos;
            while bytes.get(*pos).is_some_and(|c| !c.is_ascii_whitespace()) {
                *pos += 1;
            }
            Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
        };
        if token(&mut pos)? != "P5" {
            return Err(bad("not a binary graymap (magic P5 expected)"));
        }
        let number = |pos: &mut usize, what: &str| -> Result<usize, FormatError> {
            token(pos)?
                .parse::<usize>()
                .map_err(|_| bad(&format!("invalid {what}")))
        };
        let width = number(&mut pos, "width")?;
        let height = number(&mut pos, "height")?;
        let max_value = number(&mut pos, "maximum value")?;
        if width == 0 || height == 0 {
            return Err(bad("zero dimension"));
        }
        if max_value == 0 || max_value > 65535 {
            return Err(bad("maximum value must be in 1..=65535"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let n = width * height;
        let sample = if max_value > 255 { 2 } else { 1 };
        let raster = bytes.get(pos..).unwrap_or(&[]);
        if raster.len() < n * sample {
            return Err(bad(&format!(
                "raster holds {} bytes, expected {}",
                raster.len(),
                n * sample
            )));
        }
        let data: Vec<u16> = if sample == 2 {
            raster[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        } else {
            raster[..n].iter().map(|&v| v as u16).collect()
        };
        if data.iter().any(|&v| v as usize > max_value) {
            return Err(bad("sample exceeds the maximum value"));
        }
        Ok(Graymap {
            width,
            height,
            max_value: max_value as u16,
            data,
        })
    }
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Graymap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Graymap::decode(&bytes)?)
}

pub fn write_pgm(path: impl AsRef<Path>, map: &Graymap) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, map.encode()).map_err(|e| Error::io(path, e))
}

/// Writes a mask as an 8-bit graymap with values {0, 255}.
pub fn write_mask(mask: &ObjectMask, path: impl AsRef<Path>) -> Result<()> {
    let map = Graymap {
        width: mask.width(),
        height: mask.height(),
        max_value: 255,
        data: mask.values().iter().map(|&v| v as u16 * 255).collect(),
    };
    write_pgm(path, &map)
}

/// Reads a mask from a graymap, thresholding at half the maximum value.
pub fn read_mask(path: impl AsRef<Path>) -> Result<ObjectMask> {
    let map = read_pgm(path)?;
    ObjectMask::from_gray(map.width, map.height, &map.data, map.max_value)
}
