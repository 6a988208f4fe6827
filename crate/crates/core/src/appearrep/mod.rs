//! Appearance representation: patch geometry, feature flattening and the
//! similarity backends that score previous-frame individuals (rows) against
//! next-frame individuals (columns). Every backend returns entries in
//! `[0, 1]`.

mod diffusion;

use std::ops::Deref;

pub use diffusion::{
    diffusion_scores, similarity_diffusion, DiffusionGraph, CG_MAX_ITERATIONS, CG_TOLERANCE,
};

use crate::error::{Error, Result};
use crate::iomodel::{FeatureSet, GrayImage, PipelineConfig, Point, RetrievalBackend};
use crate::matrix::Matrix;

/// Appearance scores in `[0, 1]`, previous frame on rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix(Matrix);

impl SimilarityMatrix {
    /// Rejects entries outside `[0, 1]` or non-finite.
    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(v) = m.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("similarity entry {v}")));
        }
        Ok(SimilarityMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        SimilarityMatrix(Matrix::zeros(rows, cols))
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        SimilarityMatrix(self.0.transpose())
    }
}

impl Deref for SimilarityMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Square pixel window cropped around an individual.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patch {
    pub side: usize,
    /// Top-left `(col, row)` of the window in the source image.
    pub origin: (usize, usize),
    pub pixels: Vec<u8>,
    pub source_index: Option<usize>,
}

impl Patch {
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.side + col]
    }
}

/// Crops a `size x size` window centred on the rounded point. Windows that
/// would cross the border are shifted inward so the patch is always full size.
pub fn crop_patch(image: &GrayImage, point: &Point, size: usize) -> Result<Patch> {
    if size == 0 {
        return Err(Error::Config("patch size must be at least 1".into()));
    }
    if size > image.width || size > image.height {
        return Err(Error::Shape(format!(
            "patch size {size} exceeds image {}x{}",
            image.width, image.height
        )));
    }
    if !point.in_bounds(image.width, image.height) {
        return Err(Error::OutOfRange(format!(
            "point ({}, {}) for a {}x{} image",
            point.x, point.y, image.width, image.height
        )));
    }
    let (cx, cy) = point.pixel(image.width, image.height);
    let half = size / 2;
    let x0 = cx.saturating_sub(half).min(image.width - size);
    let y0 = cy.saturating_sub(half).min(image.height - size);
    let mut pixels = Vec::with_capacity(size * size);
    for r in y0..y0 + size {
        let start = r * image.width + x0;
        pixels.extend_from_slice(&image.pixels[start..start + size]);
    }
    Ok(Patch {
        side: size,
        origin: (x0, y0),
        pixels,
        source_index: None,
    })
}

/// One patch per point, tagged with the point index.
pub fn crop_patches(image: &GrayImage, points: &[Point], size: usize) -> Result<Vec<Patch>> {
    points
        .iter()
        .enumerate()
        .map(|(j, p)| {
            crop_patch(image, p, size).map(|mut patch| {
                patch.source_index = Some(j);
                patch
            })
        })
        .collect()
}

/// Row-major flattening of a rectangular grid. Panics on ragged rows.
pub fn flatten<T: Copy>(rows: &[Vec<T>]) -> Vec<T> {
    let cols = rows.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        assert_eq!(r.len(), cols, "ragged feature grid");
        out.extend_from_slice(r);
    }
    out
}

/// Inverse of [`flatten`] for a known column count.
pub fn unflatten<T: Copy>(flat: &[T], cols: usize) -> Vec<Vec<T>> {
    assert!(
        cols > 0 && flat.len().is_multiple_of(cols),
        "length is not a multiple of cols"
    );
    flat.chunks_exact(cols).map(<[T]>::to_vec).collect()
}

fn check_dims(a: &FeatureSet, b: &FeatureSet) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "feature dims differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt()
}

/// Cosine similarity in `[-1, 1]`; zero if either vector has zero norm.
pub(crate) fn cosine(a: &[f32], na: f64, b: &[f32], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// `(1 + cos) / 2`.
pub fn similarity_cosine(prev: &FeatureSet, next: &FeatureSet) -> Result<SimilarityMatrix> {
    check_dims(prev, next)?;
    let pn: Vec<f64> = prev.iter().map(norm).collect();
    let nn: Vec<f64> = next.iter().map(norm).collect();
    Ok(SimilarityMatrix(Matrix::from_fn(
        prev.count(),
        next.count(),
        |k, j| 0.5 * (1.0 + cosine(prev.vector(k), pn[k], next.vector(j), nn[j])),
    )))
}

/// `1 / (1 + |a - b|)`.
pub fn similarity_euclidean(prev: &FeatureSet, next: &FeatureSet) -> Result<SimilarityMatrix> {
    check_dims(prev, next)?;
    Ok(SimilarityMatrix(Matrix::from_fn(
        prev.count(),
        next.count(),
        |k, j| {
            let d2: f64 = prev
                .vector(k)
                .iter()
                .zip(next.vector(j))
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum();
            1.0 / (1.0 + d2.sqrt())
        },
    )))
}

/// Dispatches to the configured backend.
pub fn similarity(
    prev: &FeatureSet,
    next: &FeatureSet,
    config: &PipelineConfig,
) -> Result<SimilarityMatrix> {
    match config.retrieval {
        RetrievalBackend::Cosine => similarity_cosine(prev, next),
        RetrievalBackend::Euclidean => similarity_euclidean(prev, next),
        RetrievalBackend::Diffusion => similarity_diffusion(prev, next, &config.diffusion),
    }
}
