use super::MaskError;

/// Dense row-major grid of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Grid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::EmptyFrame);
        }
        if values.len() != height * width {
            return Err(MaskError::InconsistentFrameDims {
                expected: (height, width),
                found: (values.len(), 1),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MaskError::NonFiniteValue { index });
        }
        Ok(Grid {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self, MaskError> {
        Grid::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Arithmetic mean, accumulated in raster order. Exact for constant grids.
    pub fn mean(&self) -> f64 {
        if self.is_constant() {
            return self.values[0];
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divides by the pixel count).
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values[0];
        self.values.iter().all(|&v| v == first)
    }

    pub(crate) fn map_unchecked(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// One explanation frame with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFrame(Grid);

impl MaskFrame {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        MaskFrame::from_grid(Grid::new(height, width, values)?)
    }

    pub fn from_grid(grid: Grid) -> Result<Self, MaskError> {
        if let Some(&value) = grid.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MaskError::OutOfRange { value });
        }
        Ok(MaskFrame(grid))
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self, MaskError> {
        Ok(MaskFrame(Grid::filled(height, width, 0.0)?))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub(crate) fn from_grid_unchecked(grid: Grid) -> Self {
        debug_assert!(grid.values().iter().all(|v| (0.0..=1.0).contains(v)));
        MaskFrame(grid)
    }
}

impl std::ops::Deref for MaskFrame {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}

/// Explanation frame with values of either sign.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMapFrame(Grid);

impl SignedMapFrame {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, MaskError> {
        Ok(SignedMapFrame(Grid::new(height, width, values)?))
    }

    pub fn from_grid(grid: Grid) -> Self {
        SignedMapFrame(grid)
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }
}

impl std::ops::Deref for SignedMapFrame {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.0
    }
}

impl From<MaskFrame> for SignedMapFrame {
    fn from(frame: MaskFrame) -> Self {
        SignedMapFrame(frame.0)
    }
}

fn check_frames(dims: impl Iterator<Item = (usize, usize)>) -> Result<(), MaskError> {
    let mut dims = dims;
    let first = dims.next().ok_or(MaskError::EmptySequence)?;
    for found in dims {
        if found != first {
            return Err(MaskError::InconsistentFrameDims {
                expected: first,
                found,
            });
        }
    }
    Ok(())
}

macro_rules! sequence_type {
    ($(#[$doc:meta])* $name:ident, $frame:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            video_id: String,
            frames: Vec<$frame>,
        }

        impl $name {
            pub fn new(video_id: impl Into<String>, frames: Vec<$frame>) -> Result<Self, MaskError> {
                check_frames(frames.iter().map(|f| f.dims()))?;
                Ok($name {
                    video_id: video_id.into(),
                    frames,
                })
            }

            pub fn video_id(&self) -> &str {
                &self.video_id
            }

            pub fn set_video_id(&mut self, id: impl Into<String>) {
                self.video_id = id.into();
            }

            pub fn frames(&self) -> &[$frame] {
                &self.frames
            }

            pub fn into_frames(self) -> Vec<$frame> {
                self.frames
            }

            /// Number of frames (`T`).
            pub fn len(&self) -> usize {
                self.frames.len()
            }

            pub fn is_empty(&self) -> bool {
                self.frames.is_empty()
            }

            /// `(height, width)` shared by every frame.
            pub fn dims(&self) -> (usize, usize) {
                self.frames[0].dims()
            }
        }
    };
}

sequence_type!(
    /// Ordered explanation frames for one video, all with identical dimensions.
    MaskSequence,
    MaskFrame
);

sequence_type!(
    /// Signed explanation maps for one video (SHAP values, CAMs before the final ReLU).
    SignedMapSequence,
    SignedMapFrame
);

impl From<MaskSequence> for SignedMapSequence {
    fn from(seq: MaskSequence) -> Self {
        SignedMapSequence {
            video_id: seq.video_id,
            frames: seq.frames.into_iter().map(SignedMapFrame::from).collect(),
        }
    }
}

/// One 8-bit RGB frame, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::EmptyFrame);
        }
        if data.len() != height * width * 3 {
            return Err(MaskError::InconsistentFrameDims {
                expected: (height, width),
                found: (data.len() / 3 / width.max(1), width),
            });
        }
        Ok(RgbFrame {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self, MaskError> {
        let data = rgb.iter().copied().cycle().take(height * width * 3).collect();
        RgbFrame::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = (row * self.width + col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// A clip of RGB frames sharing one resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbVideo {
    frames: Vec<RgbFrame>,
}

impl RgbVideo {
    pub fn new(frames: Vec<RgbFrame>) -> Result<Self, MaskError> {
        check_frames(frames.iter().map(|f| f.dims()))?;
        Ok(RgbVideo { frames })
    }

    pub fn single(frame: RgbFrame) -> Self {
        RgbVideo {
            frames: vec![frame],
        }
    }

    pub fn frames(&self) -> &[RgbFrame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [RgbFrame] {
        &mut self.frames
    }

    pub fn into_frames(self) -> Vec<RgbFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames[0].dims()
    }
}
