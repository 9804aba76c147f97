//! Kernel SHAP over segments.
//!
//! A coalition keeps the segments whose bit is set and mutes the rest to the
//! video's mean colour. Attributions come from a weighted least-squares fit
//! under the Shapley kernel, with the efficiency constraint eliminated
//! exactly, so `base_value + Σφ` reproduces the full-input score.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::maskio::{RgbFrame, RgbVideo, SignedMapFrame, SignedMapSequence};
use crate::predictor::{predict_batch, predict_video_batch, FrameInput, PredictError, Predictor};
use crate::segment::{mean_color, mute_frame, mute_with_color, LabelVolume, SegmentError};

/// Largest feature count accepted by [`brute_force_shapley`].
pub const BRUTE_FORCE_MAX: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ShapError {
    #[error("coalition size {s} has no kernel weight for M = {m}")]
    DegenerateSize { m: usize, s: usize },
    #[error("brute-force Shapley supports at most {BRUTE_FORCE_MAX} features, got {0}")]
    TooManyFeatures(usize),
    #[error("normal equations are singular (pivot ratio {pivot_ratio:e}) even after ridge")]
    SingularSystem { pivot_ratio: f64 },
    #[error("score {0} is outside (0, 1) and has no logit")]
    LogitDomain(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

pub type Result<T> = std::result::Result<T, ShapError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coalition {
    bits: Vec<bool>,
}

impl Coalition {
    pub fn new(bits: Vec<bool>) -> Self {
        Coalition { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn size(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Shapley kernel `(M−1) / (C(M,s)·s·(M−s))`, evaluated in log space.
pub fn kernel_weight(m: usize, s: usize) -> Result<f64> {
    if s == 0 || s >= m {
        return Err(ShapError::DegenerateSize { m, s });
    }
    let s = s.min(m - s);
    let (mf, sf) = (m as f64, s as f64);
    Ok(((mf - 1.0).ln() - ln_binomial(m as u64, s as u64) - sf.ln() - (mf - sf).ln()).exp())
}

/// Total kernel mass of one size layer, `C(M,s)·π(M,s)`.
fn layer_mass(m: usize, s: usize) -> f64 {
    (m as f64 - 1.0) / (s as f64 * (m - s) as f64)
}

fn binomial_u128(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at each step: acc·(n−i) is divisible by i+1
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All size-`s` subsets of `0..m` in lexicographic order.
fn combinations(m: usize, s: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        let mut bits = vec![false; m];
        for &i in &idx {
            bits[i] = true;
        }
        out.push(bits);
        let Some(pos) = (0..s).rev().find(|&p| idx[p] != p + m - s) else {
            return out;
        };
        idx[pos] += 1;
        for p in pos + 1..s {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionSample {
    pub coalitions: Vec<Coalition>,
    pub weights: Vec<f64>,
    /// Size layers enumerated in full, each counted once per pair `(s, M−s)`.
    pub enumerated_sizes: Vec<usize>,
}

impl CoalitionSample {
    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }
}

/// Deterministic coalition design for `m` features and a budget of
/// `n_samples` distinct proper coalitions.
///
/// Size layers are enumerated in pairs `(s, M−s)` from the outside in while
/// they fit in the remaining budget. Remaining sizes are sampled with
/// probability proportional to their kernel mass, membership uniform within a
/// size; repeated draws are merged and their count folded into the weight.
pub fn sample_coalitions(m: usize, n_samples: usize, seed: u64) -> CoalitionSample {
    let mut coalitions = Vec::new();
    let mut weights = Vec::new();
    let mut enumerated_sizes = Vec::new();
    if m < 2 || n_samples == 0 {
        return CoalitionSample {
            coalitions,
            weights,
            enumerated_sizes,
        };
    }
    let mut budget = n_samples as u128;
    let mut next = 1;
    while next <= m / 2 {
        let s = next;
        let paired = s != m - s;
        let count = binomial_u128(m, s).saturating_mul(if paired { 2 } else { 1 });
        if count > budget {
            break;
        }
        let w = kernel_weight(m, s).expect("1 <= s < m");
        for bits in combinations(m, s) {
            if paired {
                let complement: Vec<bool> = bits.iter().map(|b| !b).collect();
                coalitions.push(Coalition::new(bits));
                coalitions.push(Coalition::new(complement));
                weights.extend([w, w]);
            } else {
                coalitions.push(Coalition::new(bits));
                weights.push(w);
            }
        }
        enumerated_sizes.push(s);
        budget -= count;
        next += 1;
    }

    let sizes: Vec<usize> = (next..=m - next).collect();
    if budget == 0 || sizes.is_empty() {
        return CoalitionSample {
            coalitions,
            weights,
            enumerated_sizes,
        };
    }
    let budget = budget as usize;
    let masses: Vec<f64> = sizes.iter().map(|&s| layer_mass(m, s)).collect();
    let remaining_mass: f64 = masses.iter().sum();
    let pick = WeightedIndex::new(&masses).expect("positive masses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut drawn: Vec<(Vec<bool>, u64)> = Vec::new();
    let max_draws = budget.saturating_mul(4);
    let mut draws = 0u64;
    while drawn.len() < budget && (draws as usize) < max_draws {
        let s = sizes[pick.sample(&mut rng)];
        let mut bits = vec![false; m];
        for i in index::sample(&mut rng, m, s) {
            bits[i] = true;
        }
        draws += 1;
        match seen.get(&bits) {
            Some(&i) => drawn[i].1 += 1,
            None => {
                seen.insert(bits.clone(), drawn.len());
                drawn.push((bits, 1));
            }
        }
    }
    let per_draw = remaining_mass / draws as f64;
    for (bits, mult) in drawn {
        coalitions.push(Coalition::new(bits));
        weights.push(mult as f64 * per_draw);
    }
    CoalitionSample {
        coalitions,
        weights,
        enumerated_sizes,
    }
}

/// Constrained weighted least squares for `m` features.
///
/// Fits `outputs ≈ f_empty + Σ_{i∈z} φᵢ` subject to `Σφ = f_full − f_empty`,
/// eliminating the last coefficient through the constraint.
pub fn solve_shap(
    m: usize,
    coalitions: &[Coalition],
    weights: &[f64],
    outputs: &[f64],
    f_full: f64,
    f_empty: f64,
) -> Result<Vec<f64>> {
    if coalitions.len() != weights.len() || coalitions.len() != outputs.len() {
        return Err(ShapError::InvalidInput(format!(
            "{} coalitions, {} weights, {} outputs",
            coalitions.len(),
            weights.len(),
            outputs.len()
        )));
    }
    if let Some(c) = coalitions.iter().find(|c| c.len() != m) {
        return Err(ShapError::InvalidInput(format!("coalition of length {} for M = {m}", c.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || outputs.iter().any(|y| !y.is_finite()) {
        return Err(ShapError::InvalidInput("weights and outputs must be finite, weights >= 0".into()));
    }
    let delta = f_full - f_empty;
    match m {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![delta]),
        _ => {}
    }
    let p = m - 1;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    let mut x = vec![0.0; p];
    for ((c, &w), &y) in coalitions.iter().zip(weights).zip(outputs) {
        let bits = c.bits();
        let last = f64::from(u8::from(bits[p]));
        for (xi, &bit) in x.iter_mut().zip(bits) {
            *xi = f64::from(u8::from(bit)) - last;
        }
        let yr = y - f_empty - last * delta;
        for i in 0..p {
            if x[i] == 0.0 {
                continue;
            }
            let wx = w * x[i];
            b[i] += wx * yr;
            for j in 0..p {
                a[(i, j)] += wx * x[j];
            }
        }
    }

    let beta = match cholesky_checked(&a) {
        Ok(chol) => chol.solve(&b),
        Err(_) => {
            let lambda = 1e-6 * a.trace() / m as f64;
            let ridged = &a + DMatrix::identity(p, p) * lambda;
            match cholesky_checked(&ridged) {
                Ok(chol) => {
                    log::warn!("reduced normal matrix is singular; solved with ridge {lambda:e}");
                    chol.solve(&b)
                }
                Err(pivot_ratio) => return Err(ShapError::SingularSystem { pivot_ratio }),
            }
        }
    };
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(ShapError::SingularSystem { pivot_ratio: 0.0 });
    }
    let mut phi: Vec<f64> = beta.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok(phi)
}

/// Cholesky factor, or the smallest squared-pivot to diagonal ratio when the
/// matrix is not numerically positive definite.
fn cholesky_checked(a: &DMatrix<f64>) -> std::result::Result<nalgebra::Cholesky<f64, nalgebra::Dyn>, f64> {
    let max_diag = a.diagonal().iter().fold(0.0f64, |acc, &v| acc.max(v));
    if max_diag <= 0.0 {
        return Err(0.0);
    }
    let chol = a.clone().cholesky().ok_or(0.0)?;
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |acc, &v| acc.min(v * v));
    let ratio = min_pivot / max_diag;
    if ratio < 1e-13 {
        return Err(ratio);
    }
    Ok(chol)
}

/// Exact Shapley values by evaluating `f` on all `2^m` coalitions.
pub fn brute_force_shapley(mut f: impl FnMut(&[bool]) -> f64, m: usize) -> Result<Vec<f64>> {
    if m > BRUTE_FORCE_MAX {
        return Err(ShapError::TooManyFeatures(m));
    }
    let n = 1usize << m;
    let mut bits = vec![false; m];
    let values: Vec<f64> = (0..n)
        .map(|mask| {
            for (i, b) in bits.iter_mut().enumerate() {
                *b = mask >> i & 1 == 1;
            }
            f(&bits)
        })
        .collect();
    // s!(M−s−1)!/M! = 1 / (M·C(M−1, s))
    let weight: Vec<f64> = (0..m)
        .map(|s| 1.0 / (m as f64 * binomial_u128(m - 1, s) as f64))
        .collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in (0..n).filter(|mask| mask & bit == 0) {
            *p += weight[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapMode {
    Videowise,
    Framewise,
}

impl std::str::FromStr for ShapMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "videowise" => Ok(ShapMode::Videowise),
            "framewise" => Ok(ShapMode::Framewise),
            _ => Err(format!("unknown mode `{s}` (videowise|framewise)")),
        }
    }
}

/// Units in which predictor scores are regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSpace {
    #[default]
    Raw,
    Logit,
}

impl ScoreSpace {
    pub fn apply(self, score: f64) -> Result<f64> {
        match self {
            ScoreSpace::Raw => Ok(score),
            ScoreSpace::Logit if score > 0.0 && score < 1.0 => Ok(score.ln() - (-score).ln_1p()),
            ScoreSpace::Logit => Err(ShapError::LogitDomain(score)),
        }
    }
}

impl std::str::FromStr for ScoreSpace {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "raw" => Ok(ScoreSpace::Raw),
            "logit" => Ok(ScoreSpace::Logit),
            _ => Err(format!("unknown score space `{s}` (raw|logit)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub space: ScoreSpace,
    /// Coalitions scored per predictor call.
    pub chunk: usize,
}

impl ExplainConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        ExplainConfig {
            n_samples,
            seed,
            space: ScoreSpace::Raw,
            chunk: 32,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(ShapError::InvalidInput("need at least 2 samples".into()));
        }
        if self.chunk == 0 {
            return Err(ShapError::InvalidInput("chunk must be >= 1".into()));
        }
        Ok(())
    }
}

/// One Kernel SHAP solution: the whole clip (videowise) or one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub frame_index: Option<usize>,
    pub segment_ids: Vec<u32>,
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub full_score: f64,
    pub samples_used: usize,
    pub efficiency_residual: f64,
}

/// Spread of frame-level φ for one volume over the frames containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeStat {
    pub segment_id: u32,
    pub frames: usize,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub mode: ShapMode,
    pub space: ScoreSpace,
    pub attributions: Vec<Attribution>,
    pub volume_stats: Vec<VolumeStat>,
}

impl ShapResult {
    /// Base value of the first attribution (the only one in videowise mode).
    pub fn base_value(&self) -> f64 {
        self.attributions.first().map_or(0.0, |a| a.base_value)
    }

    pub fn samples_used(&self) -> usize {
        self.attributions.iter().map(|a| a.samples_used).sum()
    }

    /// Largest efficiency residual over all attributions.
    pub fn efficiency_residual(&self) -> f64 {
        self.attributions
            .iter()
            .fold(0.0, |acc, a| acc.max(a.efficiency_residual))
    }
}

fn attribution(
    frame_index: Option<usize>,
    segment_ids: Vec<u32>,
    sample: &CoalitionSample,
    outputs: &[f64],
    f_full: f64,
    f_empty: f64,
) -> Result<Attribution> {
    let m = segment_ids.len();
    let phi = solve_shap(m, &sample.coalitions, &sample.weights, outputs, f_full, f_empty)?;
    let efficiency_residual = (f_empty + phi.iter().sum::<f64>() - f_full).abs();
    Ok(Attribution {
        frame_index,
        segment_ids,
        phi,
        base_value: f_empty,
        full_score: f_full,
        samples_used: sample.len(),
        efficiency_residual,
    })
}

fn transform(space: ScoreSpace, scores: Vec<f64>) -> Result<Vec<f64>> {
    scores.into_iter().map(|s| space.apply(s)).collect()
}

/// One φ per volume; each coalition mutes whole volumes in every frame.
pub fn explain_videowise(
    video: &RgbVideo,
    labels: &LabelVolume,
    predictor: &dyn Predictor,
    cfg: &ExplainConfig,
) -> Result<ShapResult> {
    cfg.validate()?;
    let m = labels.k();
    let color = mean_color(video);
    let all_off = vec![false; m];
    let ends = [mute_with_color(video, labels, &vec![true; m], color)?, mute_with_color(video, labels, &all_off, color)?];
    let ends = transform(cfg.space, predict_video_batch(predictor, &ends)?)?;
    let (f_full, f_empty) = (ends[0], ends[1]);

    let sample = sample_coalitions(m, cfg.n_samples, cfg.seed);
    let chunks: Vec<Vec<f64>> = sample
        .coalitions
        .par_chunks(cfg.chunk)
        .map(|chunk| -> Result<Vec<f64>> {
            let videos = chunk
                .iter()
                .map(|c| mute_with_color(video, labels, c.bits(), color))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            transform(cfg.space, predict_video_batch(predictor, &videos)?)
        })
        .collect::<Result<_>>()?;
    let outputs: Vec<f64> = chunks.into_iter().flatten().collect();

    let ids = (0..m as u32).collect();
    Ok(ShapResult {
        mode: ShapMode::Videowise,
        space: cfg.space,
        attributions: vec![attribution(None, ids, &sample, &outputs, f_full, f_empty)?],
        volume_stats: Vec::new(),
    })
}

/// One independent Kernel SHAP run per frame over the volumes present in it.
/// Every frame uses the same seed, so identical frames get identical φ.
pub fn explain_framewise(
    video: &RgbVideo,
    labels: &LabelVolume,
    predictor: &dyn Predictor,
    cfg: &ExplainConfig,
) -> Result<ShapResult> {
    cfg.validate()?;
    if video.len() != labels.frames() || video.dims() != (labels.height(), labels.width()) {
        return Err(ShapError::InvalidInput("video and labels differ in dimensions".into()));
    }
    let color = mean_color(video);
    let k = labels.k();
    let mut attributions = Vec::with_capacity(video.len());
    for (t, frame) in video.frames().iter().enumerate() {
        let ids = labels.ids_in_frame(t);
        let slice = labels.slice(t);
        let render = |bits: &[bool]| -> RgbFrame {
            let mut global = vec![false; k];
            for (j, &id) in ids.iter().enumerate() {
                global[id as usize] = bits[j];
            }
            let mut out = frame.clone();
            mute_frame(&mut out, slice, &global, color);
            out
        };
        let score = |frames: &[RgbFrame]| -> Result<Vec<f64>> {
            let inputs: Vec<FrameInput<'_>> = frames
                .iter()
                .map(|f| FrameInput {
                    frame_index: t,
                    frame: f,
                })
                .collect();
            transform(cfg.space, predict_batch(predictor, &inputs)?)
        };

        let m = ids.len();
        let ends = score(&[render(&vec![true; m]), render(&vec![false; m])])?;
        let sample = sample_coalitions(m, cfg.n_samples, cfg.seed);
        let chunks: Vec<Vec<f64>> = sample
            .coalitions
            .par_chunks(cfg.chunk)
            .map(|chunk| score(&chunk.iter().map(|c| render(c.bits())).collect::<Vec<_>>()))
            .collect::<Result<_>>()?;
        let outputs: Vec<f64> = chunks.into_iter().flatten().collect();
        attributions.push(attribution(Some(t), ids, &sample, &outputs, ends[0], ends[1])?);
    }

    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); k];
    for a in &attributions {
        for (&id, &p) in a.segment_ids.iter().zip(&a.phi) {
            samples[id as usize].push(p);
        }
    }
    let volume_stats = samples
        .into_iter()
        .enumerate()
        .map(|(id, v)| {
            let n = v.len();
            // identical samples give exact statistics
            let constant = v.iter().all(|&x| x == v[0]);
            let mean = match n {
                0 => None,
                _ if constant => Some(v[0]),
                _ => Some(v.iter().sum::<f64>() / n as f64),
            };
            let variance = mean.map(|mu| {
                if constant {
                    0.0
                } else {
                    v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n as f64
                }
            });
            VolumeStat {
                segment_id: id as u32,
                frames: n,
                mean,
                variance,
            }
        })
        .collect();
    Ok(ShapResult {
        mode: ShapMode::Framewise,
        space: cfg.space,
        attributions,
        volume_stats,
    })
}

/// Signed per-pixel map: every pixel takes the φ of its segment.
pub fn shap_to_masks(result: &ShapResult, labels: &LabelVolume, video_id: &str) -> Result<SignedMapSequence> {
    let (t_count, h, w) = labels.dims();
    let lookup = |a: &Attribution| -> Vec<f64> {
        let mut table = vec![0.0; labels.k()];
        for (&id, &p) in a.segment_ids.iter().zip(&a.phi) {
            table[id as usize] = p;
        }
        table
    };
    let tables: Vec<Vec<f64>> = match result.mode {
        ShapMode::Videowise => {
            let a = result
                .attributions
                .first()
                .ok_or_else(|| ShapError::InvalidInput("result has no attribution".into()))?;
            vec![lookup(a); t_count]
        }
        ShapMode::Framewise => {
            if result.attributions.len() != t_count {
                return Err(ShapError::InvalidInput(format!(
                    "{} frame attributions for {t_count} frames",
                    result.attributions.len()
                )));
            }
            result.attributions.iter().map(lookup).collect()
        }
    };
    for a in &result.attributions {
        if a.segment_ids.iter().any(|&id| id as usize >= labels.k()) {
            return Err(ShapError::InvalidInput("segment id beyond label count".into()));
        }
    }
    let frames = (0..t_count)
        .map(|t| {
            let values = labels.slice(t).iter().map(|&l| tables[t][l as usize]).collect();
            SignedMapFrame::new(h, w, values)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ShapError::InvalidInput(e.to_string()))?;
    SignedMapSequence::new(video_id, frames).map_err(|e| ShapError::InvalidInput(e.to_string()))
}
