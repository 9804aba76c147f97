//! Intrinsic explanation-quality metrics.
//!
//! Four statistics are computed per frame, averaged per video and then
//! averaged over a video pool:
//!
//! * variance `V`: mean population variance of the frames,
//! * inter-frame consistency `τ`: mean Pearson correlation of consecutive frames,
//! * intra-frame consistency `ρ`: mean autocorrelation at four shifts of 10% of
//!   the frame size, normalized by the zero-lag autocorrelation,
//! * centredness `μ`: share of squared mass inside the centred half-area square.
//!
//! Frames where a statistic is undefined (constant frames for `τ` and `ρ`,
//! all-zero frames for `μ`) are skipped and counted, never coerced to zero.
//! Every sum runs in raster order in `f64`, so results are bit-reproducible.

use serde::{Deserialize, Serialize};

use crate::maskio::{Grid, MaskSequence};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("frame dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("need at least two frames, got {0}")]
    TooFewFrames(usize),
    #[error("lag ({0}, {1}) outside a {2}x{3} frame")]
    LagOutOfRange(isize, isize, usize, usize),
    #[error("centredness needs a square frame, got {0}x{1}")]
    NonSquareFrame(usize, usize),
    #[error("no videos to pool")]
    EmptyPool,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Shift magnitude for `ρ`, as a fraction of the frame side.
    pub shift_fraction: f64,
    /// Area of the centred crop for `μ`, as a fraction of the frame area.
    pub inner_area_fraction: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            shift_fraction: 0.1,
            inner_area_fraction: 0.5,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.shift_fraction > 0.0 && self.shift_fraction < 0.5) {
            return Err(MetricsError::InvalidConfig(format!(
                "shift_fraction {} not in (0, 0.5)",
                self.shift_fraction
            )));
        }
        if !(self.inner_area_fraction > 0.0 && self.inner_area_fraction < 1.0) {
            return Err(MetricsError::InvalidConfig(format!(
                "inner_area_fraction {} not in (0, 1)",
                self.inner_area_fraction
            )));
        }
        Ok(())
    }
}

pub fn frame_variance(frame: &Grid) -> f64 {
    frame.variance()
}

/// Pearson correlation of two equally sized frames; `None` when either is constant.
pub fn pcc(x: &Grid, y: &Grid) -> Result<Option<f64>, MetricsError> {
    if x.dims() != y.dims() {
        return Err(MetricsError::DimensionMismatch(x.dims(), y.dims()));
    }
    let mx = x.mean();
    let my = y.mean();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.values().iter().zip(y.values()) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// A per-video average together with how many frames (or frame pairs) fed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameAverage {
    pub value: Option<f64>,
    pub evaluated: usize,
    pub skipped: usize,
}

impl FrameAverage {
    fn from_samples(samples: impl IntoIterator<Item = Option<f64>>) -> FrameAverage {
        let (mut sum, mut evaluated, mut skipped) = (0.0, 0usize, 0usize);
        for s in samples {
            match s {
                Some(v) => {
                    sum += v;
                    evaluated += 1;
                }
                None => skipped += 1,
            }
        }
        FrameAverage {
            value: (evaluated > 0).then(|| sum / evaluated as f64),
            evaluated,
            skipped,
        }
    }
}

/// Mean PCC over the `T − 1` consecutive frame pairs.
pub fn inter_frame_consistency(seq: &MaskSequence) -> Result<FrameAverage, MetricsError> {
    if seq.len() < 2 {
        return Err(MetricsError::TooFewFrames(seq.len()));
    }
    let pairs = seq
        .frames()
        .windows(2)
        .map(|w| pcc(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrameAverage::from_samples(pairs))
}

/// Autocorrelation at vertical lag `di` and horizontal lag `dj`, summed over
/// the valid overlap with the full-frame mean.
pub fn autocorr(x: &Grid, di: isize, dj: isize) -> Result<f64, MetricsError> {
    let (h, w) = x.dims();
    if di.unsigned_abs() >= h || dj.unsigned_abs() >= w {
        return Err(MetricsError::LagOutOfRange(di, dj, h, w));
    }
    Ok(autocorr_with_mean(x, x.mean(), di, dj))
}

fn autocorr_with_mean(x: &Grid, mean: f64, di: isize, dj: isize) -> f64 {
    let (h, w) = x.dims();
    let rows = di.max(0) as usize..(h as isize + di.min(0)) as usize;
    let cols = dj.max(0) as usize..(w as isize + dj.min(0)) as usize;
    let vals = x.values();
    let mut acc = 0.0;
    for r in rows.clone() {
        let r2 = (r as isize - di) as usize;
        for c in cols.clone() {
            let c2 = (c as isize - dj) as usize;
            acc += (vals[r2 * w + c2] - mean) * (vals[r * w + c] - mean);
        }
    }
    acc
}

/// Shift magnitudes `(vertical, horizontal)` used by `ρ`.
pub fn shift_lags(height: usize, width: usize, cfg: &MetricsConfig) -> (usize, usize) {
    let v = (cfg.shift_fraction * height as f64).round() as usize;
    let h = (cfg.shift_fraction * width as f64).round() as usize;
    (v.min(height - 1), h.min(width - 1))
}

/// Intra-frame consistency `ρ`; `None` for constant frames.
pub fn intra_frame_consistency(x: &Grid, cfg: &MetricsConfig) -> Option<f64> {
    let mean = x.mean();
    let zero = autocorr_with_mean(x, mean, 0, 0);
    if zero == 0.0 {
        return None;
    }
    let (v, h) = shift_lags(x.height(), x.width(), cfg);
    let (v, h) = (v as isize, h as isize);
    let shifted = autocorr_with_mean(x, mean, 0, h)
        + autocorr_with_mean(x, mean, 0, -h)
        + autocorr_with_mean(x, mean, v, 0)
        + autocorr_with_mean(x, mean, -v, 0);
    Some((shifted / 4.0 / zero).clamp(-1.0, 1.0))
}

/// Side and top-left offset of the centred crop for a square frame of side `l`.
pub fn inner_crop(side: usize, cfg: &MetricsConfig) -> (usize, usize) {
    let s = (side as f64 * cfg.inner_area_fraction.sqrt()).round() as usize;
    let s = s.clamp(0, side);
    (s, (side - s) / 2)
}

/// Centredness `μ` of a square frame; `None` when the frame is all zero.
pub fn centredness_frame(f: &Grid, cfg: &MetricsConfig) -> Result<Option<f64>, MetricsError> {
    let (h, w) = f.dims();
    if h != w {
        return Err(MetricsError::NonSquareFrame(h, w));
    }
    let (s, off) = inner_crop(h, cfg);
    let vals = f.values();
    let (mut inner, mut total) = (0.0, 0.0);
    for r in 0..h {
        let row_inside = r >= off && r < off + s;
        for c in 0..w {
            let sq = vals[r * w + c] * vals[r * w + c];
            total += sq;
            if row_inside && c >= off && c < off + s {
                inner += sq;
            }
        }
    }
    if total == 0.0 {
        return Ok(None);
    }
    Ok(Some((inner / total).clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub variance: f64,
    pub inter_frame: Option<f64>,
    pub intra_frame: Option<f64>,
    pub centredness: Option<f64>,
    pub variance_frames: FrameTally,
    pub inter_frame_pairs: FrameTally,
    pub intra_frame_frames: FrameTally,
    pub centredness_frames: FrameTally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameTally {
    pub evaluated: usize,
    pub skipped: usize,
}

impl From<FrameAverage> for FrameTally {
    fn from(a: FrameAverage) -> Self {
        FrameTally {
            evaluated: a.evaluated,
            skipped: a.skipped,
        }
    }
}

/// Evaluates all four metrics on one video.
///
/// Single-frame videos leave `τ` undefined with zero pairs; non-square frames
/// leave `μ` undefined with every frame counted as skipped.
pub fn evaluate_sequence(seq: &MaskSequence, cfg: &MetricsConfig) -> VideoMetrics {
    let frames = seq.frames();
    let variance = FrameAverage::from_samples(frames.iter().map(|f| Some(frame_variance(f))));
    let inter = if seq.len() >= 2 {
        inter_frame_consistency(seq).expect("frames share dims")
    } else {
        FrameAverage {
            value: None,
            evaluated: 0,
            skipped: 0,
        }
    };
    let intra = FrameAverage::from_samples(frames.iter().map(|f| intra_frame_consistency(f, cfg)));
    let centred = FrameAverage::from_samples(
        frames
            .iter()
            .map(|f| centredness_frame(f, cfg).unwrap_or(None)),
    );
    VideoMetrics {
        video_id: seq.video_id().to_string(),
        variance: variance.value.unwrap_or(0.0),
        inter_frame: inter.value,
        intra_frame: intra.value,
        centredness: centred.value,
        variance_frames: variance.into(),
        inter_frame_pairs: inter.into(),
        intra_frame_frames: intra.into(),
        centredness_frames: centred.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledStat {
    pub mean: Option<f64>,
    pub videos_used: usize,
    pub videos_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledMetrics {
    pub videos: usize,
    pub variance: PooledStat,
    pub inter_frame: PooledStat,
    pub intra_frame: PooledStat,
    pub centredness: PooledStat,
}

/// Unweighted mean over videos, folded in video-id order.
pub fn pool(videos: &[VideoMetrics]) -> Result<PooledMetrics, MetricsError> {
    if videos.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    let mut ordered: Vec<&VideoMetrics> = videos.iter().collect();
    ordered.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let stat = |get: &dyn Fn(&VideoMetrics) -> Option<f64>| {
        let avg = FrameAverage::from_samples(ordered.iter().map(|v| get(v)));
        PooledStat {
            mean: avg.value,
            videos_used: avg.evaluated,
            videos_skipped: avg.skipped,
        }
    };
    Ok(PooledMetrics {
        videos: videos.len(),
        variance: stat(&|v| Some(v.variance)),
        inter_frame: stat(&|v| v.inter_frame),
        intra_frame: stat(&|v| v.intra_frame),
        centredness: stat(&|v| v.centredness),
    })
}

/// Per-video records (sorted by id) plus the pooled block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: MetricsConfig,
    pub videos: Vec<VideoMetrics>,
    pub pooled: PooledMetrics,
}

impl MetricsReport {
    pub fn new(config: MetricsConfig, mut videos: Vec<VideoMetrics>) -> Result<Self, MetricsError> {
        videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        let pooled = pool(&videos)?;
        Ok(MetricsReport {
            config,
            videos,
            pooled,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maskio::MaskFrame;

    fn g(h: usize, w: usize, v: &[f64]) -> Grid {
        Grid::new(h, w, v.to_vec()).unwrap()
    }

    fn seq(frames: Vec<Grid>) -> MaskSequence {
        MaskSequence::new(
            "v",
            frames
                .into_iter()
                .map(|f| MaskFrame::from_grid(f).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn variance_examples() {
        assert_eq!(frame_variance(&g(2, 2, &[0.4; 4])), 0.0);
        assert_eq!(frame_variance(&g(1, 4, &[0.0, 1.0, 0.0, 1.0])), 0.25);
        assert!((frame_variance(&g(1, 3, &[0.0, 0.5, 1.0])) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pcc_examples() {
        let x = g(1, 3, &[0.1, 0.7, 0.3]);
        assert_eq!(pcc(&x, &x).unwrap(), Some(1.0));
        let a = g(1, 3, &[0.0, 1.0, 2.0]);
        let b = g(1, 3, &[2.0, 1.0, 0.0]);
        assert_eq!(pcc(&a, &b).unwrap(), Some(-1.0));
        let a = g(1, 3, &[1.0, 2.0, 3.0]);
        let b = g(1, 3, &[1.0, 3.0, 2.0]);
        assert!((pcc(&a, &b).unwrap().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pcc_constant_and_mismatch() {
        let c = g(1, 3, &[0.5; 3]);
        let x = g(1, 3, &[0.1, 0.2, 0.3]);
        assert_eq!(pcc(&c, &x).unwrap(), None);
        assert!(matches!(
            pcc(&x, &g(3, 1, &[0.1, 0.2, 0.3])),
            Err(MetricsError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn inter_frame_examples() {
        let f = g(1, 3, &[0.1, 0.9, 0.4]);
        assert_eq!(inter_frame_consistency(&seq(vec![f.clone(); 4])).unwrap().value, Some(1.0));

        let comp = g(1, 3, &[0.9, 0.1, 0.6]);
        let alt = seq(vec![f.clone(), comp.clone(), f.clone(), comp]);
        assert!((inter_frame_consistency(&alt).unwrap().value.unwrap() + 1.0).abs() < 1e-12);

        // pcc([1,2,3]/4, [1,3,2]/4) = 0.5
        let p = g(1, 3, &[0.25, 0.5, 0.75]);
        let q = g(1, 3, &[0.25, 0.75, 0.5]);
        let avg = inter_frame_consistency(&seq(vec![p.clone(), p, q])).unwrap();
        assert!((avg.value.unwrap() - 0.75).abs() < 1e-15);
        assert_eq!((avg.evaluated, avg.skipped), (2, 0));
    }

    #[test]
    fn inter_frame_skips_constant_pairs() {
        let f = g(1, 2, &[0.0, 1.0]);
        let c = g(1, 2, &[0.5, 0.5]);
        let avg = inter_frame_consistency(&seq(vec![f.clone(), f, c])).unwrap();
        assert_eq!(avg.value, Some(1.0));
        assert_eq!((avg.evaluated, avg.skipped), (1, 1));

        let all_const = seq(vec![g(1, 1, &[0.2]), g(1, 1, &[0.3])]);
        assert_eq!(inter_frame_consistency(&all_const).unwrap().value, None);
        assert_eq!(
            inter_frame_consistency(&seq(vec![g(1, 1, &[0.2])])),
            Err(MetricsError::TooFewFrames(1))
        );
    }

    #[test]
    fn autocorr_examples() {
        let x = g(1, 2, &[0.0, 1.0]);
        assert_eq!(autocorr(&x, 0, 0).unwrap(), 0.5);
        assert_eq!(autocorr(&x, 0, 1).unwrap(), -0.25);
        assert_eq!(autocorr(&x, 0, -1).unwrap(), -0.25);
        assert_eq!(autocorr(&g(3, 3, &[0.7; 9]), 1, -2).unwrap(), 0.0);
        assert!(matches!(autocorr(&x, 1, 0), Err(MetricsError::LagOutOfRange(..))));
        assert!(matches!(autocorr(&x, 0, 2), Err(MetricsError::LagOutOfRange(..))));
    }

    #[test]
    fn intra_frame_constant_is_undefined() {
        assert_eq!(intra_frame_consistency(&g(4, 4, &[0.2; 16]), &MetricsConfig::default()), None);
    }

    #[test]
    fn intra_frame_non_square_uses_per_axis_shifts() {
        assert_eq!(shift_lags(20, 40, &MetricsConfig::default()), (2, 4));
        assert_eq!(shift_lags(380, 380, &MetricsConfig::default()), (38, 38));
        assert_eq!(shift_lags(1, 1, &MetricsConfig::default()), (0, 0));
    }

    #[test]
    fn intra_frame_smooth_ramp_is_positive() {
        let vals: Vec<f64> = (0..400).map(|i| ((i % 20) + (i / 20)) as f64 / 38.0).collect();
        let rho = intra_frame_consistency(&g(20, 20, &vals), &MetricsConfig::default()).unwrap();
        assert!(rho > 0.5, "{rho}");
    }

    #[test]
    fn centredness_examples() {
        let cfg = MetricsConfig::default();
        assert_eq!(inner_crop(8, &cfg), (6, 1));

        let mut corner = vec![0.0; 64];
        corner[0] = 1.0;
        assert_eq!(centredness_frame(&g(8, 8, &corner), &cfg).unwrap(), Some(0.0));

        assert_eq!(centredness_frame(&g(8, 8, &[0.5; 64]), &cfg).unwrap(), Some(36.0 / 64.0));

        let mut centre = vec![0.0; 64];
        centre[3 * 8 + 4] = 0.8;
        centre[4 * 8 + 3] = 0.1;
        assert_eq!(centredness_frame(&g(8, 8, &centre), &cfg).unwrap(), Some(1.0));

        assert_eq!(centredness_frame(&g(8, 8, &[0.0; 64]), &cfg).unwrap(), None);
        assert_eq!(
            centredness_frame(&g(2, 4, &[0.1; 8]), &cfg),
            Err(MetricsError::NonSquareFrame(2, 4))
        );
    }

    fn metrics_with(id: &str, variance: f64, inter: Option<f64>) -> VideoMetrics {
        VideoMetrics {
            video_id: id.into(),
            variance,
            inter_frame: inter,
            intra_frame: Some(0.5),
            centredness: Some(0.25),
            variance_frames: FrameTally::default(),
            inter_frame_pairs: FrameTally::default(),
            intra_frame_frames: FrameTally::default(),
            centredness_frames: FrameTally::default(),
        }
    }

    #[test]
    fn pool_examples() {
        let one = metrics_with("a", 0.1, Some(0.3));
        let pooled = pool(&[one.clone()]).unwrap();
        assert_eq!(pooled.variance.mean, Some(0.1));
        assert_eq!(pooled.inter_frame.mean, Some(0.3));

        let two = metrics_with("b", 0.3, None);
        let pooled = pool(&[one, two]).unwrap();
        assert!((pooled.variance.mean.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(pooled.inter_frame.mean, Some(0.3));
        assert_eq!(pooled.inter_frame.videos_skipped, 1);
        assert_eq!(pool(&[]), Err(MetricsError::EmptyPool));
    }

    #[test]
    fn pool_is_order_independent() {
        let vids: Vec<_> = (0..7)
            .map(|i| metrics_with(&format!("v{i}"), 0.013 * i as f64 + 0.001, Some(0.1 * i as f64)))
            .collect();
        let mut rev = vids.clone();
        rev.reverse();
        assert_eq!(pool(&vids).unwrap(), pool(&rev).unwrap());
    }

    #[test]
    fn evaluate_counts_frames() {
        let f = g(4, 4, &(0..16).map(|i| i as f64 / 15.0).collect::<Vec<_>>());
        let c = g(4, 4, &[0.0; 16]);
        let m = evaluate_sequence(&seq(vec![f.clone(), c, f]), &MetricsConfig::default());
        assert_eq!(m.variance_frames, FrameTally { evaluated: 3, skipped: 0 });
        assert_eq!(m.inter_frame_pairs, FrameTally { evaluated: 0, skipped: 2 });
        assert_eq!(m.intra_frame_frames, FrameTally { evaluated: 2, skipped: 1 });
        assert_eq!(m.centredness_frames, FrameTally { evaluated: 2, skipped: 1 });
        assert_eq!(m.inter_frame, None);
    }

    #[test]
    fn config_validation() {
        assert!(MetricsConfig::default().validate().is_ok());
        let bad = MetricsConfig {
            shift_fraction: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
