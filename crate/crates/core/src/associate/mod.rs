//! Cost fusion, bipartite matching, gating and trajectory bookkeeping.

mod assignment;
mod tracks;

use std::ops::Deref;

pub use assignment::{solve_assignment, solve_greedy};
pub use tracks::{step_tracks, TrackState};

use crate::appearrep::{similarity, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::iomodel::{
    validate_bundle, FramePoints, Matcher, PipelineConfig, SceneBundle, Trajectory,
};
use crate::localize::{extract_peaks, PeakParams};
use crate::matrix::Matrix;
use crate::motionrep::{distance_matrix, predict_prev_positions, rescale01};
use crate::par;

/// Fused association scores, higher is better.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix(Matrix);

impl CostMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.all_finite() {
            return Err(Error::OutOfRange("non-finite cost entry".into()));
        }
        Ok(CostMatrix(m))
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }

    /// Reorders rows; output row `i` is input row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> CostMatrix {
        CostMatrix(self.0.select_rows(order))
    }
}

impl Deref for CostMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Row/column pairing. Pairs are sorted by row; the unmatched lists are
/// ascending and together with the pairs partition both index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Matching {
    /// Builds a matching over `rows x cols`, deriving the unmatched lists.
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>, rows: usize, cols: usize) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &pairs {
            if r < rows {
                row_used[r] = true;
            }
            if c < cols {
                col_used[c] = true;
            }
        }
        Matching {
            pairs,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }

    /// Sum of the matched scores, accumulated in row order.
    pub fn total(&self, cost: &Matrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| cost.get(r, c)).sum()
    }
}

/// `-lambda * dist01 + (1 - lambda) * sim`, element-wise.
pub fn fuse_cost(dist01: &Matrix, sim: &SimilarityMatrix, lambda: f64) -> Result<CostMatrix> {
    if dist01.shape() != sim.shape() {
        return Err(Error::Shape(format!(
            "distance {:?} vs similarity {:?}",
            dist01.shape(),
            sim.shape()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )));
    }
    let (rows, cols) = dist01.shape();
    CostMatrix::new(Matrix::from_fn(rows, cols, |r, c| {
        -lambda * dist01.get(r, c) + (1.0 - lambda) * sim.get(r, c)
    }))
}

/// Dissolves pairs scoring below `gate_score`.
pub fn gate(matching: &Matching, cost: &Matrix, gate_score: f64) -> Matching {
    let (rows, cols) = cost.shape();
    let kept = matching
        .pairs
        .iter()
        .copied()
        .filter(|&(r, c)| cost.get(r, c) >= gate_score)
        .collect();
    Matching::from_pairs(kept, rows, cols)
}

pub fn solve(cost: &CostMatrix, matcher: Matcher) -> Matching {
    match matcher {
        Matcher::Hungarian => solve_assignment(cost),
        Matcher::Greedy => solve_greedy(cost),
    }
}

/// Point lists for every frame: the bundle's own, or local maxima of each
/// density map.
pub fn frame_points(bundle: &SceneBundle, config: &PipelineConfig) -> Vec<FramePoints> {
    match &bundle.points {
        Some(p) => p.clone(),
        None => {
            let params = PeakParams::from_config(config);
            par::map_slice(&bundle.density, |d| extract_peaks(d, &params))
        }
    }
}

/// Fused score matrix between frame `i` (rows, in point order) and frame
/// `i + 1` (columns).
pub fn pair_cost(
    bundle: &SceneBundle,
    points: &[FramePoints],
    i: usize,
    config: &PipelineConfig,
) -> Result<CostMatrix> {
    let (prev, next) = (&points[i], &points[i + 1]);
    let predicted = predict_prev_positions(next, &bundle.motion[i])?;
    let dist01 = rescale01(&distance_matrix(prev, &predicted));
    let sim = if config.uses_appearance() {
        let features = bundle
            .features
            .as_ref()
            .expect("feature presence checked by track_sequence");
        similarity(&features[i], &features[i + 1], config)?
    } else {
        SimilarityMatrix::zeros(prev.len(), next.len())
    };
    fuse_cost(&dist01, &sim, config.lambda)
}

/// Runs the whole association pipeline and returns every trajectory, sorted
/// by id.
pub fn track_sequence(bundle: &SceneBundle, config: &PipelineConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    let violations = validate_bundle(bundle);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let n = bundle.frame_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    if config.uses_appearance() && (bundle.features.is_none() || bundle.points.is_none()) {
        return Err(Error::Config(format!(
            "retrieval backend {} at lambda={} needs per-frame features aligned with point lists",
            config.retrieval, config.lambda
        )));
    }
    let points = frame_points(bundle, config);

    let first = Matching::from_pairs(Vec::new(), 0, points[0].len());
    let mut state = step_tracks(TrackState::new(), &first, &points[0], 0)?;
    for i in 0..n - 1 {
        let cost = pair_cost(bundle, &points, i, config)?;
        let cost = cost.select_rows(&state.active_point_indices());
        let matching = gate(&solve(&cost, config.matcher), &cost, config.gate_score);
        state = step_tracks(state, &matching, &points[i + 1], i + 1)?;
    }
    Ok(state.into_trajectories())
}
