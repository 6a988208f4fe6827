use super::Matching;
use crate::error::{Error, Result};
use crate::iomodel::{Point, Trajectory};

#[derive(Clone, Debug)]
struct Active {
    /// Index into `TrackState::history`.
    slot: usize,
    /// Index of the track's last point within its last frame.
    last_index: usize,
}

/// Trajectory bookkeeping across frames.
///
/// Active trajectories are kept in ascending id order; that order is the row
/// order of every cost matrix handed to the matcher.
#[derive(Clone, Debug, Default)]
pub struct TrackState {
    history: Vec<Trajectory>,
    active: Vec<Active>,
    next_id: u64,
    last_frame: Option<usize>,
}

impl TrackState {
    pub fn new() -> Self {
        TrackState::default()
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Ids of the active trajectories, ascending.
    pub fn active_ids(&self) -> Vec<u64> {
        self.active
            .iter()
            .map(|a| self.history[a.slot].id)
            .collect()
    }

    /// For each active trajectory (ascending id), the index of its last point
    /// in the most recent frame.
    pub fn active_point_indices(&self) -> Vec<usize> {
        self.active.iter().map(|a| a.last_index).collect()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.history
    }

    /// All trajectories, active and terminated, sorted by id.
    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.history
    }
}

/// Applies one frame's matching. Rows index active trajectories in ascending
/// id order and columns index `next_points`. Matched trajectories are
/// extended, unmatched columns start new trajectories with fresh ids (one past
/// the largest id so far, in column order) and unmatched rows terminate.
pub fn step_tracks(
    mut state: TrackState,
    matching: &Matching,
    next_points: &[Point],
    frame: usize,
) -> Result<TrackState> {
    if let Some(last) = state.last_frame {
        if frame <= last {
            return Err(Error::OutOfRange(format!(
                "frame {frame} (tracks already advanced to frame {last})"
            )));
        }
    }
    let mut col_taken = vec![false; next_points.len()];
    let mut row_taken = vec![false; state.active.len()];
    for &(r, c) in &matching.pairs {
        if r >= state.active.len() {
            return Err(Error::OutOfRange(format!(
                "matching row {r} ({} active trajectories)",
                state.active.len()
            )));
        }
        if c >= next_points.len() {
            return Err(Error::OutOfRange(format!(
                "matching column {c} ({} points)",
                next_points.len()
            )));
        }
        if row_taken[r] || col_taken[c] {
            return Err(Error::Shape(format!(
                "pair ({r}, {c}) reuses a row or column"
            )));
        }
        row_taken[r] = true;
        col_taken[c] = true;
    }

    let mut active = Vec::with_capacity(next_points.len());
    let mut pairs = matching.pairs.clone();
    pairs.sort_unstable();
    for &(r, c) in &pairs {
        let slot = state.active[r].slot;
        state.history[slot].push(frame, next_points[c]);
        active.push(Active {
            slot,
            last_index: c,
        });
    }
    for (c, p) in next_points.iter().enumerate() {
        if col_taken[c] {
            continue;
        }
        let mut t = Trajectory::new(state.next_id);
        state.next_id += 1;
        t.push(frame, *p);
        state.history.push(t);
        active.push(Active {
            slot: state.history.len() - 1,
            last_index: c,
        });
    }
    // History slots are allocated in id order, so sorting by slot sorts by id.
    active.sort_unstable_by_key(|a| a.slot);
    state.active = active;
    state.last_frame = Some(frame);
    Ok(state)
}
