//! Dense numeric array artifacts in the ALF1 on-disk format.
//!
//! One container type carries probability maps, dropout stacks (channels =
//! stochastic passes), decoder feature maps, and ground-truth instance maps.
//! A dtype tag distinguishes real-valued (F32) from instance-labeled (U32)
//! data.
//!
//! Byte layout, little-endian throughout:
//!
//! | bytes  | field                      |
//! |--------|----------------------------|
//! | 0..4   | magic `"ALF1"`             |
//! | 4..8   | format version, u32 = 1    |
//! | 8..12  | height, u32                |
//! | 12..16 | width, u32                 |
//! | 16..20 | channels, u32              |
//! | 20..24 | dtype, u32 (0=F32, 1=U32)  |
//! | 24..   | height*width*channels values, row-major, channel-last |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ALF1";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    U32,
}

impl Dtype {
    fn tag(self) -> u32 {
        match self {
            Dtype::F32 => 0,
            Dtype::U32 => 1,
        }
    }
}

/// Flat payload of an [`ArrayContainer`].
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dense H x W x C grid, row-major and channel-last.
///
/// Construction enforces positive dims and an exact payload length; value
/// ranges are role-specific and validated by the consuming operation.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayContainer {
    height: u32,
    width: u32,
    channels: u32,
    data: ArrayData,
}

impl ArrayContainer {
    pub fn new(height: u32, width: u32, channels: u32, data: ArrayData) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Validation(format!(
                "array dims must be positive, got {height}x{width}x{channels}"
            )));
        }
        let expected = height as u64 * width as u64 * channels as u64;
        if data.len() as u64 != expected {
            return Err(Error::Validation(format!(
                "array data length {} does not match {height}x{width}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_f32(height: u32, width: u32, channels: u32, values: Vec<f32>) -> Result<Self> {
        Self::new(height, width, channels, ArrayData::F32(values))
    }

    pub fn from_u32(height: u32, width: u32, channels: u32, values: Vec<u32>) -> Result<Self> {
        Self::new(height, width, channels, ArrayData::U32(values))
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::F32(_) => Dtype::F32,
            ArrayData::U32(_) => Dtype::U32,
        }
    }

    pub fn pixels(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            ArrayData::F32(v) => Some(v),
            ArrayData::U32(_) => None,
        }
    }

    pub fn as_u32(&self) -> Option<&[u32]> {
        match &self.data {
            ArrayData::U32(v) => Some(v),
            ArrayData::F32(_) => None,
        }
    }

    /// Writes the container to `path`. Store-then-load is identity.
    pub fn store(&self, path: &Path) -> Result<()> {
        let n = self.data.len();
        let mut buf = Vec::with_capacity(HEADER_LEN + n * 4);
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.height.to_le_bytes());
        buf.extend_from_slice(&self.width.to_le_bytes());
        buf.extend_from_slice(&self.channels.to_le_bytes());
        buf.extend_from_slice(&self.dtype().tag().to_le_bytes());
        match &self.data {
            ArrayData::F32(values) => {
                for v in values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            ArrayData::U32(values) => {
                for v in values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        fs::write(path, &buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a container from `path`, rejecting any header or payload
    /// length mismatch.
    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
        if buf.len() < HEADER_LEN {
            return Err(Error::format(
                path,
                format!("file too short for header: {} bytes", buf.len()),
            ));
        }
        if buf[0..4] != MAGIC {
            return Err(Error::format(path, "magic: not an ALF1 file"));
        }
        let version = read_u32(&buf, 4);
        if version != FORMAT_VERSION {
            return Err(Error::format(
                path,
                format!("version: unsupported {version}"),
            ));
        }
        let height = read_u32(&buf, 8);
        let width = read_u32(&buf, 12);
        let channels = read_u32(&buf, 16);
        for (name, value) in [("height", height), ("width", width), ("channels", channels)] {
            if value == 0 {
                return Err(Error::format(path, format!("{name}: must be positive")));
            }
        }
        let dtype = match read_u32(&buf, 20) {
            0 => Dtype::F32,
            1 => Dtype::U32,
            t => return Err(Error::format(path, format!("dtype: unknown tag {t}"))),
        };
        let count = height as u64 * width as u64 * channels as u64;
        let expected = HEADER_LEN as u64 + count * 4;
        if (buf.len() as u64) < expected {
            return Err(Error::format(
                path,
                format!(
                    "truncated payload: expected {count} values ({expected} bytes), file has {}",
                    buf.len()
                ),
            ));
        }
        if buf.len() as u64 > expected {
            return Err(Error::format(
                path,
                format!(
                    "trailing bytes: expected {expected}, file has {}",
                    buf.len()
                ),
            ));
        }
        let payload = &buf[HEADER_LEN..];
        let data = match dtype {
            Dtype::F32 => ArrayData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            Dtype::U32 => ArrayData::U32(
                payload
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        };
        ArrayContainer::new(height, width, channels, data)
    }
}

fn read_u32(buf: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes([
        buf[offset],
        buf[offset + 1],
        buf[offset + 2],
        buf[offset + 3],
    ])
}
