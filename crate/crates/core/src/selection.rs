//! Video pool filter based on face-box stability.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

/// Pool threshold on the mean normalized edge derivative.
pub const DEFAULT_THRESHOLD: f64 = 0.002;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SelectionError {
    #[error("need at least two frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {frame}: inverted box ({left}, {top}, {right}, {bottom})")]
    InvalidBox {
        frame: usize,
        left: f64,
        top: f64,
        right: f64,
        bottom: f64,
    },
    #[error("frame dimensions must be positive, got {0}x{1}")]
    InvalidFrameSize(f64, f64),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBoxSequence {
    pub video_id: String,
    pub frame_width: f64,
    pub frame_height: f64,
    pub boxes: Vec<BBox>,
}

impl BBoxSequence {
    fn validate(&self) -> Result<(), SelectionError> {
        if !(self.frame_width > 0.0 && self.frame_height > 0.0) {
            return Err(SelectionError::InvalidFrameSize(self.frame_width, self.frame_height));
        }
        for (frame, b) in self.boxes.iter().enumerate() {
            if !(b.left <= b.right && b.top <= b.bottom) {
                return Err(SelectionError::InvalidBox {
                    frame,
                    left: b.left,
                    top: b.top,
                    right: b.right,
                    bottom: b.bottom,
                });
            }
        }
        if self.boxes.len() < 2 {
            return Err(SelectionError::TooFewFrames(self.boxes.len()));
        }
        Ok(())
    }
}

/// Mean over edges and steps of `|e[t+1] − e[t]|`, with left/right edges
/// normalized by the frame width and top/bottom by the frame height.
pub fn bbox_mean_derivative(seq: &BBoxSequence) -> Result<f64, SelectionError> {
    seq.validate()?;
    let (w, h) = (seq.frame_width, seq.frame_height);
    // pixel displacements are summed per axis before normalizing
    let (mut horizontal, mut vertical) = (0.0, 0.0);
    for pair in seq.boxes.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        horizontal += (b.left - a.left).abs() + (b.right - a.right).abs();
        vertical += (b.top - a.top).abs() + (b.bottom - a.bottom).abs();
    }
    Ok((horizontal / w + vertical / h) / (4 * (seq.boxes.len() - 1)) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub video_id: String,
    pub statistic: Option<f64>,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSelection {
    pub threshold: f64,
    pub accepted: Vec<PoolEntry>,
    pub rejected: Vec<PoolEntry>,
}

/// Accepts a sequence iff its statistic is strictly below `threshold`.
/// Sequences that fail validation are rejected with the error as reason.
pub fn filter_pool(seqs: &[BBoxSequence], threshold: f64) -> PoolSelection {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for s in seqs {
        match bbox_mean_derivative(s) {
            Ok(d) if d < threshold => accepted.push(PoolEntry {
                video_id: s.video_id.clone(),
                statistic: Some(d),
                reason: None,
            }),
            Ok(d) => rejected.push(PoolEntry {
                video_id: s.video_id.clone(),
                statistic: Some(d),
                reason: Some(format!("statistic {d} >= threshold {threshold}")),
            }),
            Err(e) => rejected.push(PoolEntry {
                video_id: s.video_id.clone(),
                statistic: None,
                reason: Some(e.to_string()),
            }),
        }
    }
    PoolSelection {
        threshold,
        accepted,
        rejected,
    }
}

#[derive(Debug, Deserialize)]
struct BBoxRow {
    video_id: String,
    frame_idx: u64,
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
    frame_w: f64,
    frame_h: f64,
}

/// Reads `video_id,frame_idx,left,top,right,bottom,frame_w,frame_h` CSV.
/// Rows are grouped by video (id order) and sorted by frame index; the frame
/// size comes from each video's first frame.
pub fn read_bbox_csv(reader: impl Read) -> Result<Vec<BBoxSequence>, SelectionError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut grouped: BTreeMap<String, Vec<BBoxRow>> = BTreeMap::new();
    for row in rdr.deserialize() {
        let row: BBoxRow = row.map_err(|e| SelectionError::Csv(e.to_string()))?;
        grouped.entry(row.video_id.clone()).or_default().push(row);
    }
    Ok(grouped
        .into_iter()
        .map(|(video_id, mut rows)| {
            rows.sort_by_key(|r| r.frame_idx);
            BBoxSequence {
                video_id,
                frame_width: rows[0].frame_w,
                frame_height: rows[0].frame_h,
                boxes: rows
                    .iter()
                    .map(|r| BBox {
                        left: r.left,
                        top: r.top,
                        right: r.right,
                        bottom: r.bottom,
                    })
                    .collect(),
            }
        })
        .collect())
}
