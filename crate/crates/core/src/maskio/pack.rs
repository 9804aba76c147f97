//! MaskPack binary container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "MSKP" | version: u8 | dtype: u8 | T: u32 | H: u32 | W: u32 | payload
//! ```
//!
//! `dtype` is 0 for `u8` intensities, 1 for `f32`, 2 for `u32` segment labels.
//! The payload is frame-major, row-major and must fill the file exactly.

use super::types::{Grid, MaskFrame, MaskSequence, SignedMapFrame, SignedMapSequence};
use super::MaskError;

pub const MAGIC: &[u8; 4] = b"MSKP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8 = 0,
    F32 = 1,
    U32 = 2,
}

impl DType {
    fn from_byte(b: u8) -> Option<DType> {
        match b {
            0 => Some(DType::U8),
            1 => Some(DType::F32),
            2 => Some(DType::U32),
            _ => None,
        }
    }

    pub fn width(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::F32 | DType::U32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    U8(Vec<u8>),
    F32(Vec<f32>),
    U32(Vec<u32>),
}

impl Payload {
    pub fn dtype(&self) -> DType {
        match self {
            Payload::U8(_) => DType::U8,
            Payload::F32(_) => DType::F32,
            Payload::U32(_) => DType::U32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::U8(v) => v.len(),
            Payload::F32(v) => v.len(),
            Payload::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decoded container: dimensions plus raw payload.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPack {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub payload: Payload,
}

impl MaskPack {
    pub fn new(frames: usize, height: usize, width: usize, payload: Payload) -> Result<Self, MaskError> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(MaskError::MalformedHeader("zero dimension".into()));
        }
        let n = cell_count(frames, height, width)?;
        if payload.len() != n {
            return Err(MaskError::MalformedHeader(format!(
                "payload holds {} cells, dims require {n}",
                payload.len()
            )));
        }
        Ok(MaskPack {
            frames,
            height,
            width,
            payload,
        })
    }

    pub fn decode(bytes: &[u8]) -> Result<MaskPack, MaskError> {
        if bytes.len() < HEADER_LEN {
            return Err(MaskError::MalformedHeader(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(MaskError::MalformedHeader("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(MaskError::MalformedHeader(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let dtype = DType::from_byte(bytes[5])
            .ok_or_else(|| MaskError::MalformedHeader(format!("unknown dtype {}", bytes[5])))?;
        let frames = read_u32(&bytes[6..10]) as usize;
        let height = read_u32(&bytes[10..14]) as usize;
        let width = read_u32(&bytes[14..18]) as usize;
        if frames == 0 || height == 0 || width == 0 {
            return Err(MaskError::MalformedHeader("zero dimension".into()));
        }
        let cells = cell_count(frames, height, width)?;
        let body = &bytes[HEADER_LEN..];
        let expected = cells
            .checked_mul(dtype.width())
            .ok_or_else(|| MaskError::MalformedHeader("payload size overflows".into()))?;
        if body.len() != expected {
            return Err(MaskError::MalformedHeader(format!(
                "header declares {expected} payload bytes, found {}",
                body.len()
            )));
        }
        let payload = match dtype {
            DType::U8 => Payload::U8(body.to_vec()),
            DType::F32 => Payload::F32(
                body.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            DType::U32 => Payload::U32(body.chunks_exact(4).map(read_u32).collect()),
        };
        Ok(MaskPack {
            frames,
            height,
            width,
            payload,
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let dtype = self.payload.dtype();
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len() * dtype.width());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(dtype as u8);
        for dim in [self.frames, self.height, self.width] {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        match &self.payload {
            Payload::U8(v) => out.extend_from_slice(v),
            Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::U32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    fn frame_values(&self) -> Result<Vec<Vec<f64>>, MaskError> {
        let n = self.height * self.width;
        let flat: Vec<f64> = match &self.payload {
            Payload::U8(v) => v.iter().map(|&b| f64::from(b) / 255.0).collect(),
            Payload::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            Payload::U32(_) => {
                return Err(MaskError::MalformedHeader(
                    "label payload where intensities were expected".into(),
                ))
            }
        };
        if let Some(index) = flat.iter().position(|v| !v.is_finite()) {
            return Err(MaskError::NonFiniteValue { index });
        }
        Ok(flat.chunks_exact(n).map(<[f64]>::to_vec).collect())
    }

    pub fn to_mask_sequence(&self, video_id: &str) -> Result<MaskSequence, MaskError> {
        let frames = self
            .frame_values()?
            .into_iter()
            .map(|v| MaskFrame::new(self.height, self.width, v))
            .collect::<Result<Vec<_>, _>>()?;
        MaskSequence::new(video_id, frames)
    }

    pub fn to_signed_sequence(&self, video_id: &str) -> Result<SignedMapSequence, MaskError> {
        let frames = self
            .frame_values()?
            .into_iter()
            .map(|v| SignedMapFrame::new(self.height, self.width, v))
            .collect::<Result<Vec<_>, _>>()?;
        SignedMapSequence::new(video_id, frames)
    }

    pub fn from_grids<'a>(grids: impl IntoIterator<Item = &'a Grid>) -> Result<MaskPack, MaskError> {
        let mut frames = 0;
        let mut dims = None;
        let mut values = Vec::new();
        for g in grids {
            if *dims.get_or_insert(g.dims()) != g.dims() {
                return Err(MaskError::InconsistentFrameDims {
                    expected: dims.unwrap_or_default(),
                    found: g.dims(),
                });
            }
            values.extend(g.values().iter().map(|&v| v as f32));
            frames += 1;
        }
        let (height, width) = dims.ok_or(MaskError::EmptySequence)?;
        MaskPack::new(frames, height, width, Payload::F32(values))
    }

    pub fn from_mask_sequence(seq: &MaskSequence) -> MaskPack {
        MaskPack::from_grids(seq.frames().iter().map(|f| f.grid()))
            .expect("sequence invariants guarantee a valid pack")
    }

    pub fn from_signed_sequence(seq: &SignedMapSequence) -> MaskPack {
        MaskPack::from_grids(seq.frames().iter().map(|f| f.grid()))
            .expect("sequence invariants guarantee a valid pack")
    }
}

fn cell_count(frames: usize, height: usize, width: usize) -> Result<usize, MaskError> {
    frames
        .checked_mul(height)
        .and_then(|x| x.checked_mul(width))
        .ok_or_else(|| MaskError::MalformedHeader("dimensions overflow".into()))
}

fn read_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}
