//! Binary (P5) PGM reading and writing.

use super::types::Grid;
use super::MaskError;

/// Parses a P5 image and scales samples by `1 / maxval` into `[0, 1]`.
///
/// Samples wider than one byte (`maxval > 255`) are big-endian pairs.
pub fn decode_pgm(bytes: &[u8]) -> Result<Grid, MaskError> {
    let mut cursor = HeaderCursor { bytes, pos: 0 };
    if cursor.bytes.get(..2) != Some(b"P5".as_slice()) {
        return Err(MaskError::MalformedHeader("missing P5 magic".into()));
    }
    cursor.pos = 2;
    let width = cursor.number()?;
    let height = cursor.number()?;
    let maxval = cursor.number()?;
    if width == 0 || height == 0 {
        return Err(MaskError::MalformedHeader("zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(MaskError::MalformedHeader(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    match cursor.bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(MaskError::MalformedHeader("no raster separator".into())),
    }
    let sample_bytes = if maxval > 255 { 2 } else { 1 };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| MaskError::MalformedHeader("dimensions overflow".into()))?;
    let raster = &bytes[cursor.pos..];
    if raster.len() < n.saturating_mul(sample_bytes) {
        return Err(MaskError::MalformedHeader(format!(
            "raster holds {} bytes, need {}",
            raster.len(),
            n * sample_bytes
        )));
    }
    let scale = maxval as f64;
    let values: Vec<f64> = if sample_bytes == 1 {
        raster[..n].iter().map(|&b| f64::from(b) / scale).collect()
    } else {
        raster[..2 * n]
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_be_bytes([c[0], c[1]])) / scale)
            .collect()
    };
    if values.iter().any(|&v| v > 1.0) {
        return Err(MaskError::MalformedHeader("sample exceeds maxval".into()));
    }
    Grid::new(height, width, values)
}

/// Writes an 8-bit P5 image; values are clamped to `[0, 1]` and rounded half-up.
pub fn encode_pgm(grid: &Grid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(
        grid.values()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8),
    );
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize, MaskError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(MaskError::MalformedHeader("expected a decimal field".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MaskError::MalformedHeader("header field too large".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_single_pixel() {
        let g = decode_pgm(b"P5\n1 1\n255\n\xff").unwrap();
        assert_eq!(g.values(), &[1.0]);
        let g = decode_pgm(b"P5 1 1 255 \x00").unwrap();
        assert_eq!(g.values(), &[0.0]);
    }

    #[test]
    fn skips_comments() {
        let g = decode_pgm(b"P5\n# made by hand\n2 1\n# max\n255\n\x00\xff").unwrap();
        assert_eq!(g.dims(), (1, 2));
        assert_eq!(g.values(), &[0.0, 1.0]);
    }

    #[test]
    fn sixteen_bit_samples() {
        let g = decode_pgm(b"P5\n1 1\n65535\n\xff\xff").unwrap();
        assert_eq!(g.values(), &[1.0]);
    }

    #[test]
    fn rejects_short_raster() {
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P6\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n0\n\x00").is_err());
    }

    #[test]
    fn encode_then_decode_8bit_levels() {
        let g = Grid::new(1, 3, vec![0.0, 128.0 / 255.0, 1.0]).unwrap();
        let back = decode_pgm(&encode_pgm(&g)).unwrap();
        assert_eq!(back, g);
    }
}
