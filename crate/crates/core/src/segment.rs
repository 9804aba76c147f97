//! SLIC superpixels (2D) and supervoxels (3D), and superpixel muting.
//!
//! Each pixel carries the feature `(r, g, b, t·temporal_scale, y, x)` with
//! colour channels in `[0, 1]`. The distance to a cluster centre is
//!
//! ```text
//! D = sqrt(d_c² + (d_s / S)² · m²)
//! ```
//!
//! where `d_c` is the RGB distance, `d_s` the space(-time) distance, `S` the
//! grid step and `m` the compactness. A pixel only considers centres within
//! `S` along every axis (a `2S` window). Assignment runs in parallel over
//! rows; centre updates are sequential raster-order reductions, so results do
//! not depend on the thread count.

use rayon::prelude::*;

use crate::maskio::{MaskError, MaskPack, Payload, RgbFrame, RgbVideo};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("requested {requested} segments from only {available} pixels")]
    TooManySegments { requested: usize, available: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("coalition has {found} bits, segmentation has {expected} segments")]
    CoalitionLengthMismatch { expected: usize, found: usize },
    #[error("label volume {labels:?} does not match video {video:?}")]
    DimensionMismatch {
        labels: (usize, usize, usize),
        video: (usize, usize, usize),
    },
    #[error("labels are not a partition: {0}")]
    NotAPartition(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Dense `T × H × W` segment assignment where ids `0..k` all occur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVolume {
    frames: usize,
    height: usize,
    width: usize,
    labels: Vec<u32>,
    k: usize,
}

impl LabelVolume {
    pub fn new(frames: usize, height: usize, width: usize, labels: Vec<u32>) -> Result<Self, SegmentError> {
        if frames == 0 || height == 0 || width == 0 {
            return Err(SegmentError::NotAPartition("zero dimension".into()));
        }
        if labels.len() != frames * height * width {
            return Err(SegmentError::NotAPartition(format!(
                "{} labels for a {frames}x{height}x{width} volume",
                labels.len()
            )));
        }
        let k = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(SegmentError::NotAPartition(format!("id {missing} never occurs")));
        }
        Ok(LabelVolume {
            frames,
            height,
            width,
            labels,
            k,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    /// Number of segments.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn slice(&self, t: usize) -> &[u32] {
        let n = self.height * self.width;
        &self.labels[t * n..(t + 1) * n]
    }

    /// Pixel count per segment id.
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Sorted segment ids present in frame `t`.
    pub fn ids_in_frame(&self, t: usize) -> Vec<u32> {
        let mut present = vec![false; self.k];
        for &l in self.slice(t) {
            present[l as usize] = true;
        }
        (0..self.k as u32).filter(|&i| present[i as usize]).collect()
    }

    pub fn to_pack(&self) -> MaskPack {
        MaskPack::new(self.frames, self.height, self.width, Payload::U32(self.labels.clone()))
            .expect("label volume dims are valid")
    }

    pub fn from_pack(pack: &MaskPack) -> Result<Self, SegmentError> {
        match &pack.payload {
            Payload::U32(v) => LabelVolume::new(pack.frames, pack.height, pack.width, v.clone()),
            other => Err(SegmentError::NotAPartition(format!(
                "expected u32 label payload, found {:?}",
                other.dtype()
            ))),
        }
    }

    fn check_video(&self, video: &RgbVideo) -> Result<(), SegmentError> {
        let (h, w) = video.dims();
        if (video.len(), h, w) != self.dims() {
            return Err(SegmentError::DimensionMismatch {
                labels: self.dims(),
                video: (video.len(), h, w),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlicParams {
    pub k_target: usize,
    /// Spatial weight `m` relative to colour.
    pub compactness: f64,
    pub iterations: usize,
    /// Weight of one frame step relative to one pixel step.
    pub temporal_scale: f64,
}

impl Default for SlicParams {
    fn default() -> Self {
        SlicParams {
            k_target: 100,
            compactness: 10.0,
            iterations: 10,
            temporal_scale: 1.0,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.k_target == 0 {
            return Err(SegmentError::InvalidParams("k_target must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(SegmentError::InvalidParams("iterations must be >= 1".into()));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(SegmentError::InvalidParams("compactness must be > 0".into()));
        }
        if !(self.temporal_scale >= 0.0 && self.temporal_scale.is_finite()) {
            return Err(SegmentError::InvalidParams("temporal_scale must be >= 0".into()));
        }
        Ok(())
    }
}

/// Grid step for a single frame: `sqrt(H·W / k)`.
pub fn step_2d(height: usize, width: usize, k_target: usize) -> f64 {
    ((height * width) as f64 / k_target as f64).sqrt()
}

/// Grid step for a clip: `cbrt(T·H·W / k)`.
pub fn step_3d(frames: usize, height: usize, width: usize, k_target: usize) -> f64 {
    ((frames * height * width) as f64 / k_target as f64).cbrt()
}

/// Superpixels of one frame. Returns a volume with `T = 1`.
pub fn slic2d(frame: &RgbFrame, params: &SlicParams) -> Result<LabelVolume, SegmentError> {
    let video = RgbVideo::single(frame.clone());
    let (h, w) = frame.dims();
    check_budget(h * w, params)?;
    slic_with_step(&video, params, step_2d(h, w, params.k_target))
}

/// Supervoxels over the whole clip; one id per space-time volume.
pub fn slic3d(video: &RgbVideo, params: &SlicParams) -> Result<LabelVolume, SegmentError> {
    let (h, w) = video.dims();
    check_budget(video.len() * h * w, params)?;
    slic_with_step(video, params, step_3d(video.len(), h, w, params.k_target))
}

/// Runs 2D SLIC independently on every frame. Ids are offset per frame so
/// the result is still a partition of the clip.
pub fn slic2d_per_frame(video: &RgbVideo, params: &SlicParams) -> Result<LabelVolume, SegmentError> {
    let (h, w) = video.dims();
    let mut labels = Vec::with_capacity(video.len() * h * w);
    let mut offset = 0u32;
    for frame in video.frames() {
        let lv = slic2d(frame, params)?;
        labels.extend(lv.labels().iter().map(|&l| l + offset));
        offset += lv.k() as u32;
    }
    LabelVolume::new(video.len(), h, w, labels)
}

fn check_budget(available: usize, params: &SlicParams) -> Result<(), SegmentError> {
    params.validate()?;
    if params.k_target > available {
        return Err(SegmentError::TooManySegments {
            requested: params.k_target,
            available,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Center {
    color: [f64; 3],
    pos: [f64; 3],
}

/// Grid counts per axis `(t, y, x)` for step `s`.
fn grid_counts(dims: [usize; 3], step: f64) -> [usize; 3] {
    dims.map(|d| ((d as f64 / step).round() as usize).clamp(1, d))
}

/// SLIC with an explicit grid step, shared by the 2D and 3D entry points.
pub fn slic_with_step(video: &RgbVideo, params: &SlicParams, step: f64) -> Result<LabelVolume, SegmentError> {
    params.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(SegmentError::InvalidParams(format!("grid step {step} must be > 0")));
    }
    let (h, w) = video.dims();
    let dims = [video.len(), h, w];
    let colors: Vec<[f64; 3]> = video
        .frames()
        .iter()
        .flat_map(|f| f.pixels())
        .map(|p| p.map(|c| f64::from(c) / 255.0))
        .collect();

    let counts = grid_counts(dims, step);
    let cell = |axis: usize, coord: usize| coord * counts[axis] / dims[axis];
    let mut centers = Vec::with_capacity(counts.iter().product());
    for it in 0..counts[0] {
        for iy in 0..counts[1] {
            for ix in 0..counts[2] {
                let mut pos = [0.0; 3];
                for (axis, i) in [it, iy, ix].into_iter().enumerate() {
                    pos[axis] = (i as f64 + 0.5) * dims[axis] as f64 / counts[axis] as f64 - 0.5;
                }
                let idx = index(dims, pos.map(|p| p.round().max(0.0) as usize));
                centers.push(Center {
                    color: colors[idx],
                    pos,
                });
            }
        }
    }

    // initial assignment: the grid cell each pixel falls in
    let mut labels: Vec<u32> = Vec::with_capacity(colors.len());
    for t in 0..dims[0] {
        for y in 0..dims[1] {
            for x in 0..dims[2] {
                let c = (cell(0, t) * counts[1] + cell(1, y)) * counts[2] + cell(2, x);
                labels.push(c as u32);
            }
        }
    }

    let spatial_weight = (params.compactness / step).powi(2);
    let axis_scale = [params.temporal_scale, 1.0, 1.0];
    for _ in 0..params.iterations {
        let buckets = Buckets::new(&centers, dims, step);
        labels
            .par_chunks_mut(dims[2])
            .enumerate()
            .for_each(|(row, out)| {
                let (t, y) = (row / dims[1], row % dims[1]);
                let mut candidates = Vec::new();
                for (x, label) in out.iter_mut().enumerate() {
                    let p = [t as f64, y as f64, x as f64];
                    let color = colors[index(dims, [t, y, x])];
                    buckets.near(p, &mut candidates);
                    let mut best = f64::INFINITY;
                    let mut best_ci = None;
                    for &ci in &candidates {
                        let c = &centers[ci as usize];
                        if (0..3).any(|a| (c.pos[a] - p[a]).abs() > step) {
                            continue;
                        }
                        let dc: f64 = (0..3).map(|i| (color[i] - c.color[i]).powi(2)).sum();
                        let ds: f64 = (0..3).map(|a| ((c.pos[a] - p[a]) * axis_scale[a]).powi(2)).sum();
                        let d = dc + ds * spatial_weight;
                        if d < best {
                            best = d;
                            best_ci = Some(ci);
                        }
                    }
                    // pixels outside every window keep their previous label
                    if let Some(ci) = best_ci {
                        *label = ci;
                    }
                }
            });

        let mut sums = vec![([0.0; 3], [0.0; 3], 0usize); centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let (t, y, x) = unindex(dims, i);
            let s = &mut sums[l as usize];
            for ch in 0..3 {
                s.0[ch] += colors[i][ch];
            }
            s.1[0] += t as f64;
            s.1[1] += y as f64;
            s.1[2] += x as f64;
            s.2 += 1;
        }
        for (c, (color, pos, n)) in centers.iter_mut().zip(sums) {
            if n > 0 {
                let n = n as f64;
                c.color = color.map(|v| v / n);
                c.pos = pos.map(|v| v / n);
            }
        }
    }

    enforce_connectivity(&mut labels, dims);
    relabel_dense(&mut labels);
    LabelVolume::new(dims[0], dims[1], dims[2], labels)
}

fn index(dims: [usize; 3], p: [usize; 3]) -> usize {
    let p = [p[0].min(dims[0] - 1), p[1].min(dims[1] - 1), p[2].min(dims[2] - 1)];
    (p[0] * dims[1] + p[1]) * dims[2] + p[2]
}

fn unindex(dims: [usize; 3], i: usize) -> (usize, usize, usize) {
    let x = i % dims[2];
    let y = (i / dims[2]) % dims[1];
    let t = i / (dims[1] * dims[2]);
    (t, y, x)
}

/// Centres bucketed on a grid of cell size `step`; a point within `step` of
/// a centre on every axis lies in one of the 27 neighbouring buckets.
struct Buckets {
    shape: [usize; 3],
    step: f64,
    cells: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(centers: &[Center], dims: [usize; 3], step: f64) -> Self {
        let shape = dims.map(|d| (d as f64 / step).floor() as usize + 1);
        let mut cells = vec![Vec::new(); shape.iter().product()];
        for (i, c) in centers.iter().enumerate() {
            let b = Self::coord(shape, step, c.pos);
            cells[(b[0] * shape[1] + b[1]) * shape[2] + b[2]].push(i as u32);
        }
        Buckets { shape, step, cells }
    }

    fn coord(shape: [usize; 3], step: f64, p: [f64; 3]) -> [usize; 3] {
        [0, 1, 2].map(|a| ((p[a].max(0.0) / step).floor() as usize).min(shape[a] - 1))
    }

    fn near(&self, p: [f64; 3], out: &mut Vec<u32>) {
        out.clear();
        let b = Self::coord(self.shape, self.step, p);
        let range = |a: usize| b[a].saturating_sub(1)..=(b[a] + 1).min(self.shape[a] - 1);
        for t in range(0) {
            for y in range(1) {
                for x in range(2) {
                    out.extend_from_slice(&self.cells[(t * self.shape[1] + y) * self.shape[2] + x]);
                }
            }
        }
        // ascending index order keeps tie-breaking independent of bucket layout
        out.sort_unstable();
    }
}

fn neighbours(dims: [usize; 3], i: usize) -> impl Iterator<Item = usize> {
    let (t, y, x) = unindex(dims, i);
    let plane = dims[1] * dims[2];
    let w = dims[2];
    [
        (t > 0).then(|| i - plane),
        (t + 1 < dims[0]).then(|| i + plane),
        (y > 0).then(|| i - w),
        (y + 1 < dims[1]).then(|| i + w),
        (x > 0).then(|| i - 1),
        (x + 1 < dims[2]).then(|| i + 1),
    ]
    .into_iter()
    .flatten()
}

/// Connected components (6-connectivity, which is 4-connectivity within a
/// frame). Returns component id per cell and component sizes, numbered in
/// raster order of first cell.
fn components(labels: &[u32], dims: [usize; 3]) -> (Vec<usize>, Vec<usize>) {
    let mut comp = vec![usize::MAX; labels.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        comp[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            size += 1;
            for n in neighbours(dims, i) {
                if comp[n] == usize::MAX && labels[n] == labels[start] {
                    comp[n] = id;
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Merges every disconnected fragment of a segment into the largest adjacent
/// segment, repeating until each segment is a single connected region.
fn enforce_connectivity(labels: &mut [u32], dims: [usize; 3]) {
    loop {
        let (comp, comp_sizes) = components(labels, dims);
        let n_labels = labels.iter().max().map_or(0, |&m| m as usize + 1);
        // main component per label: largest, earliest on ties
        let mut main = vec![usize::MAX; n_labels];
        let mut comp_label = vec![0u32; comp_sizes.len()];
        for (i, &c) in comp.iter().enumerate() {
            comp_label[c] = labels[i];
        }
        for (c, &size) in comp_sizes.iter().enumerate() {
            let l = comp_label[c] as usize;
            if main[l] == usize::MAX || size > comp_sizes[main[l]] {
                main[l] = c;
            }
        }
        let mut label_sizes = vec![0usize; n_labels];
        for &l in labels.iter() {
            label_sizes[l as usize] += 1;
        }
        let is_main = |c: usize| main[comp_label[c] as usize] == c;
        if (0..comp_sizes.len()).all(is_main) {
            return;
        }
        // adjacency from each orphan fragment to neighbouring main components
        let mut target: Vec<Option<u32>> = vec![None; comp_sizes.len()];
        for i in 0..labels.len() {
            let c = comp[i];
            if is_main(c) {
                continue;
            }
            for n in neighbours(dims, i) {
                let cn = comp[n];
                if cn == c || !is_main(cn) {
                    continue;
                }
                let cand = labels[n];
                let better = match target[c] {
                    None => true,
                    Some(cur) => {
                        let (sc, sn) = (label_sizes[cur as usize], label_sizes[cand as usize]);
                        sn > sc || (sn == sc && cand < cur)
                    }
                };
                if better {
                    target[c] = Some(cand);
                }
            }
        }
        for i in 0..labels.len() {
            if let Some(t) = target[comp[i]] {
                labels[i] = t;
            }
        }
    }
}

/// Renumbers ids in raster order of first occurrence.
fn relabel_dense(labels: &mut [u32]) {
    let n = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut map = vec![u32::MAX; n];
    let mut next = 0;
    for l in labels.iter_mut() {
        let slot = &mut map[*l as usize];
        if *slot == u32::MAX {
            *slot = next;
            next += 1;
        }
        *l = *slot;
    }
}

/// Fraction of `(t, t+1)` pixel pairs whose label differs.
pub fn label_change_fraction(labels: &LabelVolume) -> f64 {
    if labels.frames() < 2 {
        return 0.0;
    }
    let changed: usize = (0..labels.frames() - 1)
        .map(|t| {
            labels
                .slice(t)
                .iter()
                .zip(labels.slice(t + 1))
                .filter(|(a, b)| a != b)
                .count()
        })
        .sum();
    changed as f64 / ((labels.frames() - 1) * labels.height() * labels.width()) as f64
}

/// Channelwise mean over every pixel of every frame, rounded half-up.
pub fn mean_color(video: &RgbVideo) -> [u8; 3] {
    let mut sums = [0u64; 3];
    let mut count = 0u64;
    for f in video.frames() {
        for p in f.pixels() {
            for c in 0..3 {
                sums[c] += u64::from(p[c]);
            }
            count += 1;
        }
    }
    sums.map(|s| ((2 * s + count) / (2 * count)) as u8)
}

/// Replaces every segment whose coalition bit is off with the video's mean colour.
pub fn mute(video: &RgbVideo, labels: &LabelVolume, coalition: &[bool]) -> Result<RgbVideo, SegmentError> {
    mute_with_color(video, labels, coalition, mean_color(video))
}

pub fn mute_with_color(
    video: &RgbVideo,
    labels: &LabelVolume,
    coalition: &[bool],
    color: [u8; 3],
) -> Result<RgbVideo, SegmentError> {
    labels.check_video(video)?;
    if coalition.len() != labels.k() {
        return Err(SegmentError::CoalitionLengthMismatch {
            expected: labels.k(),
            found: coalition.len(),
        });
    }
    let mut out = video.clone();
    for (t, frame) in out.frames_mut().iter_mut().enumerate() {
        mute_frame(frame, labels.slice(t), coalition, color);
    }
    Ok(out)
}

/// Mutes one frame in place given its label slice.
pub fn mute_frame(frame: &mut RgbFrame, slice: &[u32], coalition: &[bool], color: [u8; 3]) {
    for (px, &l) in frame.data_mut().chunks_exact_mut(3).zip(slice) {
        if !coalition[l as usize] {
            px.copy_from_slice(&color);
        }
    }
}
