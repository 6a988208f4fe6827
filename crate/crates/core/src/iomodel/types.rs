use std::ops::Deref;

/// A located individual. `x` is the column and `y` the row, origin at the
/// top-left corner with pixel centers on integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, score: f64) -> Self {
        Point { x, y, score }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Nearest integer pixel `(col, row)`, clamped into a `width x height`
    /// grid.
    pub fn pixel(&self, width: usize, height: usize) -> (usize, usize) {
        let c = self.x.round().clamp(0.0, width.saturating_sub(1) as f64) as usize;
        let r = self.y.round().clamp(0.0, height.saturating_sub(1) as f64) as usize;
        (c, r)
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x < width as f64 && self.y < height as f64
    }
}

/// Ordered list of individuals located in one frame. The list position is the
/// index used to align feature vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FramePoints {
    points: Vec<Point>,
}

impl FramePoints {
    pub fn new(points: Vec<Point>) -> Self {
        FramePoints { points }
    }

    pub fn into_inner(self) -> Vec<Point> {
        self.points
    }
}

impl Deref for FramePoints {
    type Target = [Point];

    fn deref(&self) -> &[Point] {
        &self.points
    }
}

impl From<Vec<Point>> for FramePoints {
    fn from(points: Vec<Point>) -> Self {
        FramePoints { points }
    }
}

impl FromIterator<Point> for FramePoints {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        FramePoints {
            points: iter.into_iter().collect(),
        }
    }
}

/// Per-frame non-negative likelihood grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl DensityMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        DensityMap {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    /// Panics if `values.len() != height * width`.
    pub fn from_values(height: usize, width: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), height * width, "density grid size mismatch");
        DensityMap {
            height,
            width,
            values,
        }
    }

    /// Samples `f(col, row)` at every pixel.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(c, r) as f32);
            }
        }
        DensityMap {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }
}

/// Encoded motion vector field for one frame pair, stored as three planar
/// channels. Indexed by the later frame of the pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionField {
    height: usize,
    width: usize,
    vx: Vec<f32>,
    vy: Vec<f32>,
    vz: Vec<f32>,
}

impl MotionField {
    pub fn zeros(height: usize, width: usize) -> Self {
        let n = height * width;
        MotionField {
            height,
            width,
            vx: vec![0.0; n],
            vy: vec![0.0; n],
            vz: vec![0.0; n],
        }
    }

    pub fn from_channels(
        height: usize,
        width: usize,
        vx: Vec<f32>,
        vy: Vec<f32>,
        vz: Vec<f32>,
    ) -> Self {
        let n = height * width;
        assert!(
            vx.len() == n && vy.len() == n && vz.len() == n,
            "motion channel size mismatch"
        );
        MotionField {
            height,
            width,
            vx,
            vy,
            vz,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> [f32; 3] {
        let i = row * self.width + col;
        [self.vx[i], self.vy[i], self.vz[i]]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: [f32; 3]) {
        let i = row * self.width + col;
        self.vx[i] = v[0];
        self.vy[i] = v[1];
        self.vz[i] = v[2];
    }

    /// `(vx, vy, vz)` channel slices.
    pub fn channels(&self) -> (&[f32], &[f32], &[f32]) {
        (&self.vx, &self.vy, &self.vz)
    }
}

/// Flattened appearance vectors, row `i` aligned with point `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureSet {
    pub fn empty(dim: usize) -> Self {
        FeatureSet {
            dim,
            data: Vec::new(),
        }
    }

    /// Panics if `data.len()` is not a multiple of `dim`.
    pub fn from_flat(dim: usize, data: Vec<f32>) -> Self {
        assert!(dim >= 1, "feature dim must be at least 1");
        assert_eq!(
            data.len() % dim,
            0,
            "feature data is not a whole number of rows"
        );
        FeatureSet { dim, data }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "feature row has wrong dim");
            data.extend_from_slice(r);
        }
        FeatureSet { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }
}

/// 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "image size mismatch");
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub frame: usize,
    pub point: Point,
}

/// Identity-stamped sequence of observations with strictly increasing frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub id: u64,
    pub observations: Vec<Observation>,
}

impl Trajectory {
    pub fn new(id: u64) -> Self {
        Trajectory {
            id,
            observations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.observations.first().map(|o| o.frame)
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.observations.last().map(|o| o.frame)
    }

    pub fn at_frame(&self, frame: usize) -> Option<&Point> {
        self.observations
            .binary_search_by_key(&frame, |o| o.frame)
            .ok()
            .map(|i| &self.observations[i].point)
    }

    /// Mean observation score, used as the trajectory confidence.
    pub fn confidence(&self) -> f64 {
        if self.observations.is_empty() {
            return 0.0;
        }
        self.observations.iter().map(|o| o.point.score).sum::<f64>()
            / self.observations.len() as f64
    }

    pub fn push(&mut self, frame: usize, point: Point) {
        debug_assert!(self.last_frame().is_none_or(|f| f < frame));
        self.observations.push(Observation { frame, point });
    }
}

/// Everything the engine consumes for one video clip.
///
/// `motion[k]` describes motion from frame `k` to frame `k + 1`; on disk it is
/// stored under the later frame's index.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub width: usize,
    pub height: usize,
    pub density: Vec<DensityMap>,
    pub points: Option<Vec<FramePoints>>,
    pub features: Option<Vec<FeatureSet>>,
    pub motion: Vec<MotionField>,
    pub images: Option<Vec<GrayImage>>,
}

impl SceneBundle {
    pub fn empty(width: usize, height: usize) -> Self {
        SceneBundle {
            width,
            height,
            density: Vec::new(),
            points: None,
            features: None,
            motion: Vec::new(),
            images: None,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.density.len()
    }

    /// Number of motion fields a bundle with this many frames must carry.
    pub fn expected_motion_fields(&self) -> usize {
        self.frame_count().saturating_sub(1)
    }
}
