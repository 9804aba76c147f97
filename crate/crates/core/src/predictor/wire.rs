//! Batch wire format for external predictors.
//!
//! Request, written to the child's stdin:
//!
//! ```text
//! "RGBB" | count: u32 LE | H: u32 LE | W: u32 LE | count·H·W·3 bytes of RGB
//! ```
//!
//! Reply, read from the child's stdout: `count` lines, each one ASCII decimal score.

use crate::maskio::RgbFrame;

use super::PredictError;

pub const MAGIC: &[u8; 4] = b"RGBB";
pub const HEADER_LEN: usize = 16;

pub fn encode_batch(frames: &[&RgbFrame]) -> Result<Vec<u8>, PredictError> {
    let Some(first) = frames.first() else {
        return Err(PredictError::Protocol("empty batch".into()));
    };
    let (h, w) = first.dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != (h, w)) {
        return Err(PredictError::Protocol(format!(
            "batch mixes {h}x{w} with {}x{} frames",
            f.height(),
            f.width()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * h * w * 3);
    out.extend_from_slice(MAGIC);
    for v in [frames.len(), h, w] {
        let v = u32::try_from(v).map_err(|_| PredictError::Protocol("dimension exceeds u32".into()))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in frames {
        out.extend_from_slice(f.data());
    }
    Ok(out)
}

/// Parses the fixed header, returning `(count, height, width)`.
pub fn decode_header(bytes: &[u8]) -> Result<(usize, usize, usize), PredictError> {
    if bytes.len() < HEADER_LEN {
        return Err(PredictError::Protocol("short batch header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(PredictError::Protocol("bad batch magic".into()));
    }
    let rd = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize;
    let (count, h, w) = (rd(4), rd(8), rd(12));
    if count == 0 || h == 0 || w == 0 {
        return Err(PredictError::Protocol("zero dimension in batch header".into()));
    }
    Ok((count, h, w))
}

/// Byte length of the payload following a header.
pub fn payload_len(count: usize, height: usize, width: usize) -> Result<usize, PredictError> {
    count
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .and_then(|v| v.checked_mul(3))
        .ok_or_else(|| PredictError::Protocol("batch size overflows".into()))
}

/// Decodes a complete batch (header and payload, no trailing bytes).
pub fn decode_batch(bytes: &[u8]) -> Result<Vec<RgbFrame>, PredictError> {
    let (count, h, w) = decode_header(bytes)?;
    let len = payload_len(count, h, w)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != len {
        return Err(PredictError::Protocol(format!(
            "batch declares {len} payload bytes, found {}",
            body.len()
        )));
    }
    body.chunks_exact(h * w * 3)
        .map(|c| RgbFrame::new(h, w, c.to_vec()).map_err(|e| PredictError::Protocol(e.to_string())))
        .collect()
}

/// Mean of all channel values scaled to `[0, 1]`, as computed by the
/// loopback echo predictor.
pub fn mean_pixel(frame: &RgbFrame) -> f32 {
    let sum: u64 = frame.data().iter().map(|&v| u64::from(v)).sum();
    (sum as f64 / (frame.data().len() as f64 * 255.0)) as f32
}

/// Parses one reply line into a finite score.
pub fn parse_score_line(line: &str) -> Result<f64, PredictError> {
    let trimmed = line.trim();
    let v: f64 = trimmed
        .parse()
        .map_err(|_| PredictError::Protocol(format!("not a decimal score: `{trimmed}`")))?;
    if !v.is_finite() {
        return Err(PredictError::NonFiniteScore(v));
    }
    Ok(v)
}
