//! Explanation post-processing: normalization, sign splitting, multi-scale
//! aggregation, resizing, frame sampling and overlay rendering.
//!
//! All normalizations are per frame.

use super::types::{Grid, MaskFrame, MaskSequence, RgbFrame, RgbVideo, SignedMapFrame, SignedMapSequence};
use super::MaskError;

/// Divides every frame by its largest absolute value so the extreme pixel is ±1.
/// All-zero frames pass through unchanged.
pub fn normalize_extreme(seq: &SignedMapSequence) -> SignedMapSequence {
    let frames = seq
        .frames()
        .iter()
        .map(|f| {
            let m = f.max_abs();
            if m == 0.0 {
                f.clone()
            } else {
                SignedMapFrame::from_grid(f.map_unchecked(|v| v / m))
            }
        })
        .collect();
    SignedMapSequence::new(seq.video_id(), frames).expect("dims preserved")
}

/// Splits a normalized signed map into `(fake, real)` masks: positive values
/// support the fake class, negative values the real class.
pub fn split_signed(seq: &SignedMapSequence) -> Result<(MaskSequence, MaskSequence), MaskError> {
    let mut fake = Vec::with_capacity(seq.len());
    let mut real = Vec::with_capacity(seq.len());
    for f in seq.frames() {
        if let Some(&value) = f.values().iter().find(|v| v.abs() > 1.0) {
            return Err(MaskError::OutOfRange { value });
        }
        // `max` would map -0.0 to -0.0; compare explicitly so both halves are +0.0 or positive
        fake.push(MaskFrame::from_grid_unchecked(
            f.map_unchecked(|v| if v > 0.0 { v } else { 0.0 }),
        ));
        real.push(MaskFrame::from_grid_unchecked(
            f.map_unchecked(|v| if v < 0.0 { -v } else { 0.0 }),
        ));
    }
    let id = seq.video_id();
    Ok((
        MaskSequence::new(id, fake).expect("dims preserved"),
        MaskSequence::new(id, real).expect("dims preserved"),
    ))
}

pub fn normalize_max_frame(f: &MaskFrame) -> MaskFrame {
    let (_, hi) = f.min_max();
    if hi == 0.0 {
        f.clone()
    } else {
        MaskFrame::from_grid_unchecked(f.map_unchecked(|v| v / hi))
    }
}

/// Scales each frame so its maximum is 1. All-zero frames are unchanged.
pub fn normalize_max(seq: &MaskSequence) -> MaskSequence {
    let frames = seq.frames().iter().map(normalize_max_frame).collect();
    MaskSequence::new(seq.video_id(), frames).expect("dims preserved")
}

fn source_coord(dst: usize, src_size: usize, dst_size: usize) -> (usize, usize, f64) {
    let x = (dst as f64 + 0.5) * (src_size as f64 / dst_size as f64) - 0.5;
    let x = x.clamp(0.0, (src_size - 1) as f64);
    let lo = x.floor() as usize;
    let hi = (lo + 1).min(src_size - 1);
    (lo, hi, x - lo as f64)
}

/// Bilinear resampling with half-pixel centers and clamped edges.
///
/// Interpolates as `a + t·(b − a)` so equal neighbours reproduce exactly, and
/// clamps to the neighbour range so outputs never leave the input bounds.
pub fn resize_grid(grid: &Grid, target_h: usize, target_w: usize) -> Result<Grid, MaskError> {
    if target_h == 0 || target_w == 0 {
        return Err(MaskError::EmptyFrame);
    }
    let (h, w) = grid.dims();
    let cols: Vec<_> = (0..target_w).map(|c| source_coord(c, w, target_w)).collect();
    let mut out = Vec::with_capacity(target_h * target_w);
    for r in 0..target_h {
        let (r0, r1, ty) = source_coord(r, h, target_h);
        for &(c0, c1, tx) in &cols {
            let v00 = grid.get(r0, c0);
            let v01 = grid.get(r0, c1);
            let v10 = grid.get(r1, c0);
            let v11 = grid.get(r1, c1);
            let top = v00 + tx * (v01 - v00);
            let bottom = v10 + tx * (v11 - v10);
            let v = top + ty * (bottom - top);
            let lo = v00.min(v01).min(v10).min(v11);
            let hi = v00.max(v01).max(v10).max(v11);
            out.push(v.clamp(lo, hi));
        }
    }
    Grid::new(target_h, target_w, out)
}

pub fn resize_bilinear(f: &MaskFrame, target_h: usize, target_w: usize) -> Result<MaskFrame, MaskError> {
    Ok(MaskFrame::from_grid_unchecked(resize_grid(f.grid(), target_h, target_w)?))
}

pub fn resize_sequence(seq: &MaskSequence, target_h: usize, target_w: usize) -> Result<MaskSequence, MaskError> {
    let frames = seq
        .frames()
        .iter()
        .map(|f| resize_bilinear(f, target_h, target_w))
        .collect::<Result<Vec<_>, _>>()?;
    MaskSequence::new(seq.video_id(), frames)
}

/// Upscales every map to the largest resolution among them, sums, and
/// max-normalizes each frame.
///
/// The per-pixel sum is taken over the sorted contributions, so the result
/// is bit-identical under any ordering of `maps`.
pub fn aggregate_multiscale(maps: &[MaskSequence]) -> Result<MaskSequence, MaskError> {
    let first = maps.first().ok_or(MaskError::EmptySequence)?;
    let t = first.len();
    if let Some(m) = maps.iter().find(|m| m.len() != t) {
        return Err(MaskError::MismatchedFrameCount {
            expected: t,
            found: m.len(),
        });
    }
    let target_h = maps.iter().map(|m| m.dims().0).max().unwrap_or(1);
    let target_w = maps.iter().map(|m| m.dims().1).max().unwrap_or(1);
    let upscaled = maps
        .iter()
        .map(|m| resize_sequence(m, target_h, target_w))
        .collect::<Result<Vec<_>, _>>()?;

    let n = target_h * target_w;
    let mut frames = Vec::with_capacity(t);
    let mut stack = Vec::with_capacity(maps.len());
    for ti in 0..t {
        let mut summed = Vec::with_capacity(n);
        for i in 0..n {
            stack.clear();
            stack.extend(upscaled.iter().map(|m| m.frames()[ti].values()[i]));
            stack.sort_by(f64::total_cmp);
            summed.push(stack.iter().sum::<f64>());
        }
        let hi = summed.iter().copied().fold(0.0_f64, f64::max);
        if hi > 0.0 {
            summed.iter_mut().for_each(|v| *v /= hi);
        }
        frames.push(MaskFrame::new(target_h, target_w, summed)?);
    }
    MaskSequence::new(first.video_id(), frames)
}

/// `n_samples` evenly spaced indices from `0` to `n_total − 1`, rounded half
/// away from zero. Duplicates appear when `n_samples > n_total`.
pub fn sample_indices(n_total: usize, n_samples: usize) -> Vec<usize> {
    if n_total == 0 || n_samples == 0 {
        return Vec::new();
    }
    if n_samples == 1 {
        return vec![0];
    }
    let last = (n_total - 1) as u128;
    let denom = (n_samples - 1) as u128;
    // exact integer form of round(k·last/denom)
    (0..n_samples as u128)
        .map(|k| ((2 * k * last + denom) / (2 * denom)) as usize)
        .collect()
}

/// Blends a red overlay onto `video`; mask value is the per-pixel opacity.
/// Masks at a different resolution are bilinearly resized first.
pub fn overlay(video: &RgbVideo, mask: &MaskSequence) -> Result<RgbVideo, MaskError> {
    if video.len() != mask.len() {
        return Err(MaskError::MismatchedFrameCount {
            expected: video.len(),
            found: mask.len(),
        });
    }
    let (h, w) = video.dims();
    let mut frames = Vec::with_capacity(video.len());
    for (src, m) in video.frames().iter().zip(mask.frames()) {
        let alpha = if m.dims() == (h, w) {
            m.clone()
        } else {
            resize_bilinear(m, h, w)?
        };
        let mut data = Vec::with_capacity(h * w * 3);
        for (px, &a) in src.pixels().zip(alpha.values()) {
            let blend = |c: u8, target: f64| -> u8 {
                let v = (1.0 - a) * f64::from(c) + a * target;
                (v + 0.5).floor().clamp(0.0, 255.0) as u8
            };
            data.push(blend(px[0], 255.0));
            data.push(blend(px[1], 0.0));
            data.push(blend(px[2], 0.0));
        }
        frames.push(RgbFrame::new(h, w, data)?);
    }
    RgbVideo::new(frames)
}
