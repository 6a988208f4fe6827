//! Motion-and-position maps: encoding ground-truth displacements into a
//! per-pixel vector field, decoding offsets at located points, predicting
//! previous-frame positions and building the distance matrix.
//!
//! A displacement `d = c_prev - c_next` is stored as the unit 3-vector
//! `(d_x, d_y, 1) / |(d_x, d_y, 1)|` scaled by a Gaussian presence likelihood
//! `L`. The z component is never negative and the full offset is recovered as
//! `(v_x / v_z, v_y / v_z)`.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::iomodel::{MotionField, Point};
use crate::matrix::Matrix;

/// Below this z component a pixel carries no motion evidence.
pub const EPS_Z: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpmParams {
    /// Gaussian spread of the presence likelihood, pixels.
    pub sigma: f64,
    /// Pixels farther than this from an individual are left untouched.
    pub radius: f64,
}

impl Default for MpmParams {
    fn default() -> Self {
        MpmParams {
            sigma: 3.0,
            radius: 9.0,
        }
    }
}

/// Renders a motion field from known correspondences.
///
/// `correspondence[j]` is the index into `prev_points` of next-frame
/// individual `j`, or `None` for an individual that just appeared (left
/// unencoded). Where disks overlap the larger likelihood wins, ties going to
/// the lower next-frame index.
pub fn encode_mpm(
    prev_points: &[Point],
    next_points: &[Point],
    correspondence: &[Option<usize>],
    params: &MpmParams,
    height: usize,
    width: usize,
) -> Result<MotionField> {
    if correspondence.len() != next_points.len() {
        return Err(Error::Shape(format!(
            "correspondence has {} entries for {} next-frame points",
            correspondence.len(),
            next_points.len()
        )));
    }
    if params.sigma.is_nan() || params.sigma <= 0.0 {
        return Err(Error::Config(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }
    let mut field = MotionField::zeros(height, width);
    if height == 0 || width == 0 {
        return Ok(field);
    }
    let mut best = vec![0.0f64; height * width];
    let two_s2 = 2.0 * params.sigma * params.sigma;
    let r2 = params.radius * params.radius;

    for (j, (next, link)) in next_points.iter().zip(correspondence).enumerate() {
        let Some(k) = *link else { continue };
        let prev = prev_points.get(k).ok_or_else(|| {
            Error::OutOfRange(format!(
                "correspondence {j} -> previous index {k} (of {})",
                prev_points.len()
            ))
        })?;
        let (dx, dy) = (prev.x - next.x, prev.y - next.y);
        let norm = (dx * dx + dy * dy + 1.0).sqrt();
        let dir = [dx / norm, dy / norm, 1.0 / norm];

        let c0 = (next.x - params.radius).floor().max(0.0) as usize;
        let r0 = (next.y - params.radius).floor().max(0.0) as usize;
        let c1 = ((next.x + params.radius).ceil().max(0.0) as usize).min(width - 1);
        let r1 = ((next.y + params.radius).ceil().max(0.0) as usize).min(height - 1);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let d2 = (col as f64 - next.x).powi(2) + (row as f64 - next.y).powi(2);
                if d2 > r2 {
                    continue;
                }
                let l = (-d2 / two_s2).exp();
                let slot = &mut best[row * width + col];
                if l > *slot {
                    *slot = l;
                    field.set(
                        col,
                        row,
                        [
                            (l * dir[0]) as f32,
                            (l * dir[1]) as f32,
                            (l * dir[2]) as f32,
                        ],
                    );
                }
            }
        }
    }
    Ok(field)
}

/// Offset `(dx, dy)` stored at the pixel nearest to `point`.
pub fn decode_offset(field: &MotionField, point: &Point) -> Result<(f64, f64)> {
    if !point.x.is_finite()
        || !point.y.is_finite()
        || !point.in_bounds(field.width(), field.height())
    {
        return Err(Error::OutOfRange(format!(
            "point ({}, {}) for a {}x{} motion field",
            point.x,
            point.y,
            field.width(),
            field.height()
        )));
    }
    let (col, row) = point.pixel(field.width(), field.height());
    let [vx, vy, vz] = field.get(col, row).map(f64::from);
    if vz > EPS_Z {
        Ok((vx / vz, vy / vz))
    } else {
        Ok((0.0, 0.0))
    }
}

/// Next-frame detections mapped back into the previous frame, index-aligned
/// with the detections they came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictedPoints(Vec<Point>);

impl PredictedPoints {
    pub fn into_inner(self) -> Vec<Point> {
        self.0
    }
}

impl Deref for PredictedPoints {
    type Target = [Point];

    fn deref(&self) -> &[Point] {
        &self.0
    }
}

impl From<Vec<Point>> for PredictedPoints {
    fn from(points: Vec<Point>) -> Self {
        PredictedPoints(points)
    }
}

/// Adds each point's decoded offset and clamps the result to the field.
pub fn predict_prev_positions(
    next_points: &[Point],
    field: &MotionField,
) -> Result<PredictedPoints> {
    let max_x = field.width().saturating_sub(1) as f64;
    let max_y = field.height().saturating_sub(1) as f64;
    next_points
        .iter()
        .map(|p| {
            let (dx, dy) = decode_offset(field, p)?;
            Ok(Point {
                x: (p.x + dx).clamp(0.0, max_x),
                y: (p.y + dy).clamp(0.0, max_y),
                score: p.score,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(PredictedPoints)
}

/// Pixel distances between previous-frame detections (rows) and predicted
/// positions of next-frame detections (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix(Matrix);

impl DistanceMatrix {
    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for DistanceMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

pub fn distance_matrix(prev_points: &[Point], predicted: &[Point]) -> DistanceMatrix {
    DistanceMatrix(Matrix::from_fn(
        prev_points.len(),
        predicted.len(),
        |k, j| prev_points[k].distance(&predicted[j]),
    ))
}

/// Min-max rescale into `[0, 1]`; a constant matrix becomes all zeros.
pub fn rescale01(m: &DistanceMatrix) -> Matrix {
    m.0.rescaled_unit(0.0)
}
