//! Error classes and their exit codes.

use std::fmt;

use xplmark_core::maskio::MaskError;
use xplmark_core::metrics::MetricsError;
use xplmark_core::predictor::PredictError;
use xplmark_core::segment::SegmentError;
use xplmark_core::selection::SelectionError;
use xplmark_core::shapkernel::ShapError;
use xplmark_core::stats::StatsError;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or parameters: exit 1.
    Usage(String),
    /// Unreadable or invalid input data: exit 2.
    Data(String),
    /// External predictor failed: exit 3.
    Predictor(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Predictor(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Predictor(m) => write!(f, "predictor error: {m}"),
        }
    }
}

impl From<MaskError> for Failure {
    fn from(e: MaskError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<SelectionError> for Failure {
    fn from(e: SelectionError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<SegmentError> for Failure {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::InvalidParams(_) | SegmentError::TooManySegments { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<PredictError> for Failure {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::InvalidSpec(_) => Failure::Usage(e.to_string()),
            PredictError::InvalidInput(_) | PredictError::Io(_) => Failure::Data(e.to_string()),
            _ => Failure::Predictor(e.to_string()),
        }
    }
}

impl From<ShapError> for Failure {
    fn from(e: ShapError) -> Self {
        match e {
            ShapError::Predict(p) => p.into(),
            ShapError::Segment(s) => s.into(),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}
