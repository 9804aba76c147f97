//! Deterministic predictors used by tests and demos.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::maskio::{RgbFrame, RgbVideo};
use crate::segment::LabelVolume;

use super::{FrameInput, PredictError, Predictor};

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean absolute deviation above which a segment counts as present.
const PRESENT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyLinearWeights {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl ToyLinearWeights {
    pub fn from_json(text: &str) -> Result<Self, PredictError> {
        let w: Self = serde_json::from_str(text).map_err(|e| PredictError::InvalidSpec(format!("weights file: {e}")))?;
        if !w.bias.is_finite() || w.weights.iter().any(|v| !v.is_finite()) {
            return Err(PredictError::InvalidSpec("weights must be finite".into()));
        }
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self, PredictError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `σ(b + Σ_s w_s·u_s)` where `u_s` is 1 when segment `s` differs from the
/// mute colour. Frame scoring looks only at the segments of that frame;
/// clip scoring looks at the whole volume.
#[derive(Debug, Clone)]
pub struct ToyLinear {
    weights: ToyLinearWeights,
    labels: LabelVolume,
    mute_color: [u8; 3],
}

impl ToyLinear {
    pub fn new(weights: ToyLinearWeights, labels: LabelVolume, mute_color: [u8; 3]) -> Result<Self, PredictError> {
        if weights.weights.len() != labels.k() {
            return Err(PredictError::InvalidSpec(format!(
                "{} weights for {} segments",
                weights.weights.len(),
                labels.k()
            )));
        }
        Ok(ToyLinear {
            weights,
            labels,
            mute_color,
        })
    }

    fn accumulate(&self, frame: &RgbFrame, t: usize, dev: &mut [f64], count: &mut [usize]) -> Result<(), PredictError> {
        if t >= self.labels.frames() || frame.dims() != (self.labels.height(), self.labels.width()) {
            return Err(PredictError::InvalidInput(format!(
                "frame {t} ({}x{}) does not match the label volume",
                frame.height(),
                frame.width()
            )));
        }
        let m = self.mute_color;
        for (p, &l) in frame.pixels().zip(self.labels.slice(t)) {
            let d: u32 = (0..3).map(|c| u32::from(p[c].abs_diff(m[c]))).sum();
            dev[l as usize] += f64::from(d) / (3.0 * 255.0);
            count[l as usize] += 1;
        }
        Ok(())
    }

    fn score(&self, dev: &[f64], count: &[usize]) -> f64 {
        let z: f64 = self
            .weights
            .weights
            .iter()
            .zip(dev.iter().zip(count))
            .filter(|(_, (&d, &n))| n > 0 && d / n as f64 > PRESENT_EPS)
            .map(|(w, _)| w)
            .sum();
        logistic(self.weights.bias + z)
    }
}

impl Predictor for ToyLinear {
    fn predict_frames(&self, batch: &[FrameInput<'_>]) -> Result<Vec<f64>, PredictError> {
        let k = self.labels.k();
        batch
            .iter()
            .map(|i| {
                let (mut dev, mut count) = (vec![0.0; k], vec![0; k]);
                self.accumulate(i.frame, i.frame_index, &mut dev, &mut count)?;
                Ok(self.score(&dev, &count))
            })
            .collect()
    }

    fn predict_videos(&self, videos: &[RgbVideo]) -> Result<Vec<f64>, PredictError> {
        let k = self.labels.k();
        videos
            .iter()
            .map(|v| {
                let (mut dev, mut count) = (vec![0.0; k], vec![0; k]);
                for (t, f) in v.frames().iter().enumerate() {
                    self.accumulate(f, t, &mut dev, &mut count)?;
                }
                Ok(self.score(&dev, &count))
            })
            .collect()
    }
}

/// Mean intensity in `[0, 1]` of the centred crop covering half the frame area.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyBrightness;

impl ToyBrightness {
    pub fn score_frame(frame: &RgbFrame) -> f64 {
        let (h, w) = frame.dims();
        let side = |l: usize| ((l as f64 * 0.5f64.sqrt()).round() as usize).clamp(1, l);
        let (ch, cw) = (side(h), side(w));
        let (r0, c0) = ((h - ch) / 2, (w - cw) / 2);
        let mut sum = 0u64;
        for r in r0..r0 + ch {
            for c in c0..c0 + cw {
                sum += frame.pixel(r, c).iter().map(|&v| u64::from(v)).sum::<u64>();
            }
        }
        sum as f64 / (3.0 * 255.0 * (ch * cw) as f64)
    }
}

impl Predictor for ToyBrightness {
    fn predict_frames(&self, batch: &[FrameInput<'_>]) -> Result<Vec<f64>, PredictError> {
        Ok(batch.iter().map(|i| Self::score_frame(i.frame)).collect())
    }
}
