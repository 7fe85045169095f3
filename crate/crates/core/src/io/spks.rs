//! The SPKS frame-stack format.
//!
//! A 36-byte little-endian header followed by the frames as row-major
//! IEEE-754 single-precision values:
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 4    | magic `SPKS`                            |
//! | 4      | 2    | version (1)                             |
//! | 6      | 2    | flags                                   |
//! | 8      | 4    | width                                   |
//! | 12     | 4    | height                                  |
//! | 16     | 4    | frame count                             |
//! | 20     | 1    | dtype (0 = f32)                         |
//! | 21     | 1    | light kind (0 thermal, 1 superthermal, 2 ingested) |
//! | 22     | 8    | master seed                             |
//! | 30     | 6    | reserved, zero                          |
//!
//! Flag bit 0 marks a 32-byte trailer after the payload holding the bucket
//! and reference rectangles of a two-portion camera image as eight `u32`.

use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use crate::error::{Error, FormatError, Result};
use crate::frame::{ArmLayout, Frame, FrameSource, FrameStack, LightKind, Roi};

pub const MAGIC: [u8; 4] = *b"SPKS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 36;
pub const FLAG_ARM_LAYOUT: u16 = 1;
const TRAILER_LEN: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackHeader {
    pub version: u16,
    pub flags: u16,
    pub width: u32,
    pub height: u32,
    pub frame_count: u32,
    pub dtype: u8,
    pub light_kind: LightKind,
    pub master_seed: u64,
}

impl StackHeader {
    pub fn new(
        width: usize,
        height: usize,
        frame_count: usize,
        light_kind: LightKind,
        master_seed: u64,
    ) -> Result<Self> {
        let to_u32 = |v: usize, name: &str| {
            u32::try_from(v).map_err(|_| Error::Config(format!("{name} {v} does not fit the SPKS header")))
        };
        Ok(StackHeader {
            version: VERSION,
            flags: 0,
            width: to_u32(width, "width")?,
            height: to_u32(height, "height")?,
            frame_count: to_u32(frame_count, "frame count")?,
            dtype: 0,
            light_kind,
            master_seed,
        })
    }

    pub fn frame_bytes(&self) -> u64 {
        self.width as u64 * self.height as u64 * 4
    }

    pub fn payload_bytes(&self) -> u64 {
        self.frame_bytes() * self.frame_count as u64
    }

    /// Total file length implied by the header.
    pub fn file_len(&self) -> u64 {
        let trailer = if self.flags & FLAG_ARM_LAYOUT != 0 {
            TRAILER_LEN
        } else {
            0
        };
        HEADER_LEN + self.payload_bytes() + trailer
    }

    pub fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        LittleEndian::write_u16(&mut b[4..6], self.version);
        LittleEndian::write_u16(&mut b[6..8], self.flags);
        LittleEndian::write_u32(&mut b[8..12], self.width);
        LittleEndian::write_u32(&mut b[12..16], self.height);
        LittleEndian::write_u32(&mut b[16..20], self.frame_count);
        b[20] = self.dtype;
        b[21] = self.light_kind.code();
        LittleEndian::write_u64(&mut b[22..30], self.master_seed);
        b
    }

    pub fn decode(b: &[u8; HEADER_LEN as usize]) -> Result<Self, FormatError> {
        let magic: [u8; 4] = b[0..4].try_into().expect("four bytes");
        if magic != MAGIC {
            return Err(FormatError::BadMagic { found: magic });
        }
        let version = LittleEndian::read_u16(&b[4..6]);
        if version != VERSION {
            return Err(FormatError::BadVersion { found: version });
        }
        let flags = LittleEndian::read_u16(&b[6..8]);
        if flags & !FLAG_ARM_LAYOUT != 0 {
            return Err(FormatError::BadFlags { found: flags });
        }
        let width = LittleEndian::read_u32(&b[8..12]);
        let height = LittleEndian::read_u32(&b[12..16]);
        if width == 0 {
            return Err(FormatError::ZeroDimension { field: "width" });
        }
        if height == 0 {
            return Err(FormatError::ZeroDimension { field: "height" });
        }
        if b[20] != 0 {
            return Err(FormatError::BadDtype { found: b[20] });
        }
        let light_kind = LightKind::from_code(b[21]).ok_or(FormatError::BadLightKind { found: b[21] })?;
        if b[30..36].iter().any(|&v| v != 0) {
            return Err(FormatError::BadReserved);
        }
        Ok(StackHeader {
            version,
            flags,
            width,
            height,
            frame_count: LittleEndian::read_u32(&b[16..20]),
            dtype: 0,
            light_kind,
            master_seed: LittleEndian::read_u64(&b[22..30]),
        })
    }
}

fn encode_layout(layout: &ArmLayout) -> Result<[u8; TRAILER_LEN as usize]> {
    let mut b = [0u8; TRAILER_LEN as usize];
    let vals = [
        layout.bucket.x,
        layout.bucket.y,
        layout.bucket.width,
        layout.bucket.height,
        layout.reference.x,
        layout.reference.y,
        layout.reference.width,
        layout.reference.height,
    ];
    for (i, v) in vals.iter().enumerate() {
        let v = u32::try_from(*v).map_err(|_| Error::Config(format!("arm layout value {v} exceeds u32")))?;
        LittleEndian::write_u32(&mut b[4 * i..4 * i + 4], v);
    }
    Ok(b)
}

fn decode_layout(b: &[u8]) -> ArmLayout {
    let v = |i: usize| LittleEndian::read_u32(&b[4 * i..4 * i + 4]) as usize;
    ArmLayout {
        bucket: Roi::new(v(0), v(1), v(2), v(3)),
        reference: Roi::new(v(4), v(5), v(6), v(7)),
    }
}

/// Streams frames into an SPKS file; the frame count is patched on `finish`.
pub struct StackWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: StackHeader,
    arm_layout: Option<ArmLayout>,
    count: usize,
}

impl StackWriter {
    pub fn create(
        path: impl AsRef<Path>,
        width: usize,
        height: usize,
        light_kind: LightKind,
        master_seed: u64,
        arm_layout: Option<ArmLayout>,
    ) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut header = StackHeader::new(width, height, 0, light_kind, master_seed)?;
        if width == 0 || height == 0 {
            return Err(Error::Config("stack dimensions must be non-zero".into()));
        }
        if let Some(layout) = &arm_layout {
            layout.bucket.check_within("bucket arm", width, height)?;
            layout.reference.check_within("reference arm", width, height)?;
            header.flags |= FLAG_ARM_LAYOUT;
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        out.write_all(&header.encode()).map_err(|e| Error::io(&path, e))?;
        Ok(StackWriter {
            path,
            out,
            header,
            arm_layout,
            count: 0,
        })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        frame.check_dims(self.header.width as usize, self.header.height as usize)?;
        if self.count >= u32::MAX as usize {
            return Err(Error::Config("SPKS stacks hold at most 2^32 - 1 frames".into()));
        }
        for &v in frame.data() {
            self.out
                .write_f32::<LittleEndian>(v)
                .map_err(|e| Error::io(&self.path, e))?;
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let io = |e| Error::io(&self.path, e);
        if let Some(layout) = &self.arm_layout {
            self.out.write_all(&encode_layout(layout)?).map_err(io)?;
        }
        self.header.frame_count = self.count as u32;
        let mut file = self
            .out
            .into_inner()
            .map_err(|e| Error::io(&self.path, e.into_error()))?;
        file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(&self.path, e))?;
        file.write_all(&self.header.encode())
            .map_err(|e| Error::io(&self.path, e))?;
        file.sync_all().map_err(|e| Error::io(&self.path, e))
    }
}

/// Writes every frame of `source` to `path`.
pub fn write_source<S: FrameSource + ?Sized>(
    source: &S,
    path: impl AsRef<Path>,
    light_kind: LightKind,
    master_seed: u64,
    arm_layout: Option<ArmLayout>,
) -> Result<()> {
    let mut w = StackWriter::create(
        path,
        source.width(),
        source.height(),
        light_kind,
        master_seed,
        arm_layout,
    )?;
    let mut buf = Frame::zeros(source.width(), source.height());
    for i in 0..source.len() {
        source.load(i, &mut buf)?;
        w.push(&buf)?;
    }
    w.finish()
}

pub fn write_stack(stack: &FrameStack, path: impl AsRef<Path>) -> Result<()> {
    write_source(stack, path, stack.light_kind, stack.master_seed, stack.arm_layout)
}

/// Random-access reader over an SPKS file.
#[derive(Debug)]
pub struct StackReader {
    path: PathBuf,
    file: File,
    header: StackHeader,
    arm_layout: Option<ArmLayout>,
}

impl StackReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let actual = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if actual < HEADER_LEN {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN,
                actual,
            }
            .into());
        }
        let mut raw = [0u8; HEADER_LEN as usize];
        file.read_exact(&mut raw).map_err(|e| Error::io(&path, e))?;
        let header = StackHeader::decode(&raw)?;
        let expected = header.file_len();
        if actual != expected {
            return Err(FormatError::Truncated { expected, actual }.into());
        }
        let arm_layout = if header.flags & FLAG_ARM_LAYOUT != 0 {
            let mut t = [0u8; TRAILER_LEN as usize];
            file.read_exact_at(&mut t, HEADER_LEN + header.payload_bytes())
                .map_err(|e| Error::io(&path, e))?;
            Some(decode_layout(&t))
        } else {
            None
        };
        Ok(StackReader {
            path,
            file,
            header,
            arm_layout,
        })
    }

    pub fn header(&self) -> &StackHeader {
        &self.header
    }

    pub fn arm_layout(&self) -> Option<ArmLayout> {
        self.arm_layout
    }

    pub fn into_stack(self) -> Result<FrameStack> {
        let mut frames = Vec::new();
        frames
            .try_reserve_exact(self.len())
            .map_err(|_| Error::ResourceExhausted { frame_index: 0 })?;
        let mut buf = Frame::zeros(self.width(), self.height());
        for i in 0..self.len() {
            self.load(i, &mut buf)?;
            frames.push(buf.clone());
        }
        let mut stack = FrameStack::new(
            self.width(),
            self.height(),
            frames,
            self.header.master_seed,
            self.header.light_kind,
        )?;
        stack.arm_layout = self.arm_layout;
        Ok(stack)
    }
}

impl FrameSource for StackReader {
    fn width(&self) -> usize {
        self.header.width as usize
    }

    fn height(&self) -> usize {
        self.header.height as usize
    }

    fn len(&self) -> usize {
        self.header.frame_count as usize
    }

    fn load(&self, index: usize, buf: &mut Frame) -> Result<()> {
        if index >= self.len() {
            return Err(FormatError::FrameIndex {
                index,
                count: self.len(),
            }
            .into());
        }
        let mut raw = vec![0u8; self.header.frame_bytes() as usize];
        self.file
            .read_exact_at(&mut raw, HEADER_LEN + index as u64 * self.header.frame_bytes())
            .map_err(|e| Error::io(&self.path, e))?;
        buf.resize_to(self.width(), self.height());
        LittleEndian::read_f32_into(&raw, buf.data_mut());
        if let Some(i) = buf.data().iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(
                "StackReader::load",
                format!(
                    "frame {index}, pixel ({}, {}) is not a finite non-negative intensity",
                    i % self.width(),
                    i / self.width()
                ),
            ));
        }
        Ok(())
    }
}

pub fn read_stack(path: impl AsRef<Path>) -> Result<FrameStack> {
    StackReader::open(path)?.into_stack()
}
