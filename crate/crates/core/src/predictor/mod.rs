//! The black-box scoring boundary.
//!
//! Scores follow the convention "1 = fake". Built-in toy predictors exist for
//! tests and demos; real detectors run as a child process speaking the
//! [`wire`] protocol.

mod external;
mod toy;
pub mod wire;

use std::path::PathBuf;

pub use external::{CommandPredictor, TIMEOUT_ENV};
pub use toy::{logistic, ToyBrightness, ToyLinear, ToyLinearWeights};

use crate::maskio::{RgbFrame, RgbVideo};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("external predictor protocol error: {0}")]
    Protocol(String),
    #[error("external predictor timed out after {0} ms")]
    Timeout(u64),
    #[error("predictor returned a non-finite score ({0})")]
    NonFiniteScore(f64),
    #[error("predictor returned {found} scores for {expected} inputs")]
    CountMismatch { expected: usize, found: usize },
    #[error("invalid predictor spec: {0}")]
    InvalidSpec(String),
    #[error("predictor input: {0}")]
    InvalidInput(String),
    #[error("predictor io: {0}")]
    Io(#[from] std::io::Error),
}

/// A frame handed to a predictor together with its index in the source clip.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub frame_index: usize,
    pub frame: &'a RgbFrame,
}

pub trait Predictor: Send + Sync {
    /// Scores a batch of frames, one score per input, in input order.
    fn predict_frames(&self, batch: &[FrameInput<'_>]) -> Result<Vec<f64>, PredictError>;

    /// Scores whole clips. The default is the unweighted mean of the
    /// per-frame scores.
    fn predict_videos(&self, videos: &[RgbVideo]) -> Result<Vec<f64>, PredictError> {
        let inputs: Vec<FrameInput<'_>> = videos
            .iter()
            .flat_map(|v| {
                v.frames()
                    .iter()
                    .enumerate()
                    .map(|(frame_index, frame)| FrameInput { frame_index, frame })
            })
            .collect();
        let scores = self.predict_frames(&inputs)?;
        let mut out = Vec::with_capacity(videos.len());
        let mut offset = 0;
        for v in videos {
            let slice = &scores[offset..offset + v.len()];
            out.push(slice.iter().sum::<f64>() / v.len() as f64);
            offset += v.len();
        }
        Ok(out)
    }
}

/// Checks a predictor reply: one finite score per input. Scores outside
/// `[0, 1]` are kept and logged.
pub fn check_scores(expected: usize, scores: Vec<f64>) -> Result<Vec<f64>, PredictError> {
    if scores.len() != expected {
        return Err(PredictError::CountMismatch {
            expected,
            found: scores.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(PredictError::NonFiniteScore(s));
    }
    if let Some(&s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        log::warn!("predictor score {s} outside [0, 1]; keeping raw value");
    }
    Ok(scores)
}

/// Frame-level batch scoring with reply validation.
pub fn predict_batch(predictor: &dyn Predictor, inputs: &[FrameInput<'_>]) -> Result<Vec<f64>, PredictError> {
    if let Some(first) = inputs.first() {
        if inputs.iter().any(|i| i.frame.dims() != first.frame.dims()) {
            return Err(PredictError::InvalidInput("batch frames differ in size".into()));
        }
    }
    check_scores(inputs.len(), predictor.predict_frames(inputs)?)
}

/// Clip-level batch scoring with reply validation.
pub fn predict_video_batch(predictor: &dyn Predictor, videos: &[RgbVideo]) -> Result<Vec<f64>, PredictError> {
    check_scores(videos.len(), predictor.predict_videos(videos)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorKind {
    ToyLinear { weights: PathBuf },
    ToyBrightness,
    External { argv: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub batch_size: usize,
}

impl PredictorSpec {
    /// Parses `toy:linear:FILE`, `toy:brightness` or `cmd:EXECUTABLE ARGS...`.
    pub fn parse(s: &str, batch_size: usize) -> Result<Self, PredictError> {
        if batch_size == 0 {
            return Err(PredictError::InvalidSpec("batch size must be >= 1".into()));
        }
        let kind = if let Some(rest) = s.strip_prefix("toy:") {
            match rest.split_once(':') {
                Some(("linear", file)) if !file.is_empty() => PredictorKind::ToyLinear {
                    weights: PathBuf::from(file),
                },
                None if rest == "brightness" => PredictorKind::ToyBrightness,
                _ => return Err(PredictError::InvalidSpec(format!("unknown toy predictor `{rest}`"))),
            }
        } else if let Some(cmd) = s.strip_prefix("cmd:") {
            let argv = shell_words::split(cmd)
                .map_err(|e| PredictError::InvalidSpec(format!("command line: {e}")))?;
            if argv.is_empty() {
                return Err(PredictError::InvalidSpec("empty command".into()));
            }
            PredictorKind::External { argv }
        } else {
            return Err(PredictError::InvalidSpec(format!(
                "`{s}` is not toy:linear:FILE, toy:brightness or cmd:\"...\""
            )));
        };
        Ok(PredictorSpec { kind, batch_size })
    }
}
