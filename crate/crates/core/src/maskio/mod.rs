//! Explanation containers, file formats and the mask post-processing pipeline.

mod io;
mod ops;
pub mod pack;
mod pgm;
mod types;

use std::path::{Path, PathBuf};

pub use io::{
    decode_png, encode_png, load_mask_sequence, load_png_video, load_signed_sequence,
    save_mask_sequence, save_pgm_dir, save_png_video, save_signed_sequence, sorted_files,
    video_id_for, SequenceFormat,
};
pub use ops::{
    aggregate_multiscale, normalize_extreme, normalize_max, normalize_max_frame, overlay,
    resize_bilinear, resize_grid, resize_sequence, sample_indices, split_signed,
};
pub use pack::{DType, MaskPack, Payload};
pub use pgm::{decode_pgm, encode_pgm};
pub use types::{Grid, MaskFrame, MaskSequence, RgbFrame, RgbVideo, SignedMapFrame, SignedMapSequence};

#[derive(Debug, thiserror::Error)]
pub enum MaskError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("inconsistent frame dimensions: expected {expected:?}, found {found:?}")]
    InconsistentFrameDims {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("value {value} out of range")]
    OutOfRange { value: f64 },
    #[error("frame count mismatch: expected {expected}, found {found}")]
    MismatchedFrameCount { expected: usize, found: usize },
    #[error("sequence has no frames")]
    EmptySequence,
    #[error("frame has a zero dimension")]
    EmptyFrame,
    #[error("image codec: {0}")]
    Image(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MaskError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        MaskError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
