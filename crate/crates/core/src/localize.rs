//! Individual localization as local maxima of a density map.
//!
//! A pixel is a peak when no pixel in the `window x window` neighbourhood
//! centred on it (clipped at the borders) holds a larger value, its value is
//! positive and at least `max(abs_threshold, rel_threshold * global_max)`, and
//! it is the smallest `(y, x)` pixel of its plateau: the 8-connected component
//! of pixels sharing exactly its value. The last rule keeps one peak per flat
//! top.

use std::collections::{HashMap, VecDeque};

use crate::iomodel::{DensityMap, FramePoints, PipelineConfig, Point};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakParams {
    /// Odd neighbourhood side, at least 3.
    pub window: usize,
    pub rel_threshold: f64,
    pub abs_threshold: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        PeakParams {
            window: 3,
            rel_threshold: 0.3,
            abs_threshold: 0.02,
        }
    }
}

impl PeakParams {
    pub fn from_config(config: &PipelineConfig) -> Self {
        PeakParams {
            window: config.peak_window,
            rel_threshold: config.peak_rel_threshold,
            abs_threshold: config.peak_abs_threshold,
        }
    }

    /// Acceptance threshold for a map whose largest value is `global_max`.
    pub fn threshold(&self, global_max: f64) -> f64 {
        self.abs_threshold.max(self.rel_threshold * global_max)
    }
}

struct Candidate {
    col: usize,
    row: usize,
    on_plateau: bool,
}

/// Scans one row for pixels that dominate their window.
fn row_candidates(map: &DensityMap, row: usize, radius: usize, threshold: f64) -> Vec<Candidate> {
    let (w, h) = (map.width(), map.height());
    let r0 = row.saturating_sub(radius);
    let r1 = (row + radius).min(h - 1);
    let mut out = Vec::new();
    for col in 0..w {
        let v = map.get(col, row);
        if v <= 0.0 || (v as f64) < threshold {
            continue;
        }
        let c0 = col.saturating_sub(radius);
        let c1 = (col + radius).min(w - 1);
        let mut dominated = false;
        let mut on_plateau = false;
        'scan: for rr in r0..=r1 {
            for (cc, &u) in map.row(rr)[c0..=c1].iter().enumerate() {
                let cc = cc + c0;
                if u > v {
                    dominated = true;
                    break 'scan;
                }
                if u == v
                    && (rr, cc) != (row, col)
                    && rr.abs_diff(row) <= 1
                    && cc.abs_diff(col) <= 1
                {
                    on_plateau = true;
                }
            }
        }
        if !dominated {
            out.push(Candidate {
                col,
                row,
                on_plateau,
            });
        }
    }
    out
}

/// Smallest `(row, col)` of the 8-connected equal-value component holding
/// `start`. Every visited pixel is cached with the result.
fn plateau_min(
    map: &DensityMap,
    start: (usize, usize),
    cache: &mut HashMap<(usize, usize), (usize, usize)>,
) -> (usize, usize) {
    if let Some(&m) = cache.get(&start) {
        return m;
    }
    let (w, h) = (map.width(), map.height());
    let value = map.get(start.1, start.0);
    // Placeholder entries mark pixels as visited until the minimum is known.
    cache.insert(start, start);
    let mut component = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut best = start;
    while let Some((r, c)) = queue.pop_front() {
        best = best.min((r, c));
        for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                if map.get(cc, rr) == value && !cache.contains_key(&(rr, cc)) {
                    cache.insert((rr, cc), start);
                    component.push((rr, cc));
                    queue.push_back((rr, cc));
                }
            }
        }
    }
    for p in component {
        cache.insert(p, best);
    }
    best
}

/// Extracts local maxima, sorted by `(y, x)`. Scores are the density values
/// clamped to `[0, 1]`.
pub fn extract_peaks(map: &DensityMap, params: &PeakParams) -> FramePoints {
    assert!(
        params.window >= 3 && params.window % 2 == 1,
        "peak window must be odd and at least 3"
    );
    let (w, h) = (map.width(), map.height());
    if w == 0 || h == 0 {
        return FramePoints::default();
    }
    let threshold = params.threshold(map.max() as f64);
    let radius = params.window / 2;

    let rows = par::map_range(h, |r| row_candidates(map, r, radius, threshold));

    let mut cache = HashMap::new();
    rows.into_iter()
        .flatten()
        .filter(|c| !c.on_plateau || plateau_min(map, (c.row, c.col), &mut cache) == (c.row, c.col))
        .map(|c| {
            let v = map.get(c.col, c.row) as f64;
            Point::new(c.col as f64, c.row as f64, v.clamp(0.0, 1.0))
        })
        .collect()
}

/// Number of located individuals.
pub fn count(map: &DensityMap, params: &PeakParams) -> usize {
    extract_peaks(map, params).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(h: usize, w: usize, centers: &[(f64, f64)], sigma: f64) -> DensityMap {
        DensityMap::from_fn(h, w, |c, r| {
            centers
                .iter()
                .map(|&(x, y)| {
                    let d2 = (c as f64 - x).powi(2) + (r as f64 - y).powi(2);
                    (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
    }

    #[test]
    fn single_blob_peak_is_global_argmax() {
        let map = blobs(128, 128, &[(40.0, 25.0)], 3.0);
        let (mut best, mut arg) = (f32::MIN, (0, 0));
        for r in 0..128 {
            for c in 0..128 {
                if map.get(c, r) > best {
                    best = map.get(c, r);
                    arg = (c, r);
                }
            }
        }
        let peaks = extract_peaks(&map, &PeakParams::default());
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].x, peaks[0].y), (arg.0 as f64, arg.1 as f64));
        assert_eq!((peaks[0].x, peaks[0].y), (40.0, 25.0));
        assert_eq!(peaks[0].score, 1.0);
    }

    #[test]
    fn zero_map_has_no_peaks() {
        let map = DensityMap::zeros(64, 64);
        assert!(extract_peaks(&map, &PeakParams::default()).is_empty());
        let lax = PeakParams {
            rel_threshold: 0.0,
            abs_threshold: 0.0,
            ..PeakParams::default()
        };
        assert_eq!(count(&map, &lax), 0);
    }

    #[test]
    fn two_blobs_two_peaks() {
        let map = blobs(64, 64, &[(20.0, 20.0), (40.0, 40.0)], 3.0);
        let peaks = extract_peaks(&map, &PeakParams::default());
        let xy: Vec<_> = peaks.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(xy, vec![(20.0, 20.0), (40.0, 40.0)]);
    }

    #[test]
    fn plateau_yields_one_peak_at_smallest_pixel() {
        let mut map = DensityMap::zeros(10, 10);
        // U-shaped plateau: two arms joined at the bottom.
        for (c, r) in [
            (2, 2),
            (2, 3),
            (2, 4),
            (3, 4),
            (4, 4),
            (5, 4),
            (6, 4),
            (6, 3),
            (6, 2),
        ] {
            map.values_mut()[r * 10 + c] = 0.8;
        }
        let peaks = extract_peaks(&map, &PeakParams::default());
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].x, peaks[0].y), (2.0, 2.0));
    }

    #[test]
    fn scores_are_clamped() {
        let mut map = DensityMap::zeros(5, 5);
        map.values_mut()[12] = 3.5;
        let peaks = extract_peaks(&map, &PeakParams::default());
        assert_eq!(peaks.len(), 1);
        assert_eq!(peaks[0].score, 1.0);
    }

    #[test]
    fn border_peak_uses_clipped_window() {
        let mut map = DensityMap::zeros(6, 6);
        map.values_mut()[0] = 0.9;
        let peaks = extract_peaks(&map, &PeakParams::default());
        assert_eq!(peaks.len(), 1);
        assert_eq!((peaks[0].x, peaks[0].y), (0.0, 0.0));
    }

    #[test]
    fn relative_threshold_drops_weak_peaks() {
        let mut map = DensityMap::zeros(9, 9);
        map.values_mut()[2 * 9 + 2] = 1.0;
        map.values_mut()[6 * 9 + 6] = 0.2;
        assert_eq!(count(&map, &PeakParams::default()), 1);
        let lax = PeakParams {
            rel_threshold: 0.1,
            ..PeakParams::default()
        };
        assert_eq!(count(&map, &lax), 2);
    }
}
