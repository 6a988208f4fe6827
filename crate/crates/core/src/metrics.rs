//! Counting, localization and tracking metrics.
//!
//! Average precision is the step-wise area under the precision-recall curve:
//! each true positive at rank `n` adds `precision(n) / n_gt`. Predictions are
//! ranked by descending confidence, ties kept in input order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::iomodel::{FramePoints, Point, Trajectory};
use crate::par;

/// Ratio thresholds averaged into T-mAP.
pub const T_AP_RATIOS: [f64; 3] = [0.10, 0.15, 0.20];
/// Per-frame distance under which a track segment counts as matched.
pub const SEGMENT_PX: f64 = 25.0;
/// Pixel thresholds averaged into L-mAP.
pub const L_AP_THRESHOLDS: std::ops::RangeInclusive<u32> = 1..=25;
/// L-AP thresholds printed in reports.
pub const L_AP_REPORTED: [u32; 3] = [10, 15, 20];

/// `(MAE, RMSE)` of per-frame counts.
pub fn counting_errors(pred: &[usize], gt: &[usize]) -> Result<(f64, f64)> {
    if pred.is_empty() || pred.len() != gt.len() {
        return Err(Error::Shape(format!(
            "count sequences must be non-empty and equally long ({} vs {})",
            pred.len(),
            gt.len()
        )));
    }
    let n = pred.len() as f64;
    let (abs, sq) = pred.iter().zip(gt).fold((0.0, 0.0), |(a, s), (&p, &g)| {
        let d = p as f64 - g as f64;
        (a + d.abs(), s + d * d)
    });
    Ok((abs / n, (sq / n).sqrt()))
}

/// AP of a ranked hit list against `n_gt` ground-truth items. With no ground
/// truth the AP is 1 when there are no predictions and 0 otherwise.
pub fn average_precision(ranked_hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if ranked_hits.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (i, &hit) in ranked_hits.iter().enumerate() {
        if hit {
            tp += 1;
            ap += tp as f64 / (i + 1) as f64;
        }
    }
    ap / n_gt as f64
}

/// Indices sorted by descending score, ties in index order.
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Localization AP at a pixel threshold. Predictions from all frames are
/// pooled; each one, in descending score order, claims the nearest unclaimed
/// ground-truth point of its frame within `threshold`.
pub fn localization_ap(pred: &[FramePoints], gt: &[FramePoints], threshold: f64) -> f64 {
    let frames = pred.len().max(gt.len());
    let empty = FramePoints::default();
    let gt_at = |f: usize| gt.get(f).unwrap_or(&empty);
    let n_gt: usize = gt.iter().map(|g| g.len()).sum();

    let pooled: Vec<(usize, &Point)> = (0..pred.len())
        .flat_map(|f| pred[f].iter().map(move |p| (f, p)))
        .collect();
    let scores: Vec<f64> = pooled.iter().map(|(_, p)| p.score).collect();

    let mut claimed: Vec<Vec<bool>> = (0..frames).map(|f| vec![false; gt_at(f).len()]).collect();
    let hits: Vec<bool> = rank_by_score(&scores)
        .into_iter()
        .map(|i| {
            let (f, p) = pooled[i];
            let best = gt_at(f)
                .iter()
                .enumerate()
                .filter(|(g, _)| !claimed[f][*g])
                .map(|(g, q)| (g, p.distance(q)))
                .filter(|&(_, d)| d <= threshold)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((g, _)) => {
                    claimed[f][g] = true;
                    true
                }
                None => false,
            }
        })
        .collect();
    average_precision(&hits, n_gt)
}

/// L-AP at every threshold in [`L_AP_THRESHOLDS`].
pub fn localization_ap_curve(pred: &[FramePoints], gt: &[FramePoints]) -> BTreeMap<u32, f64> {
    let thresholds: Vec<u32> = L_AP_THRESHOLDS.collect();
    let aps = par::map_slice(&thresholds, |&t| localization_ap(pred, gt, t as f64));
    thresholds.into_iter().zip(aps).collect()
}

/// Mean L-AP over 1..=25 px.
pub fn l_map(pred: &[FramePoints], gt: &[FramePoints]) -> f64 {
    let curve = localization_ap_curve(pred, gt);
    curve.values().sum::<f64>() / curve.len() as f64
}

/// Fraction of the frames covered by either trajectory in which both exist
/// and lie within `px` of each other.
pub fn match_ratio(pred: &Trajectory, gt: &Trajectory, px: f64) -> f64 {
    let (a, b) = (&pred.observations, &gt.observations);
    let (mut i, mut j) = (0, 0);
    let (mut union, mut hits) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        union += 1;
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.frame == y.frame => {
                if x.point.distance(&y.point) <= px {
                    hits += 1;
                }
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.frame < y.frame => i += 1,
            (Some(_), Some(_)) => j += 1,
            (Some(_), None) => i += 1,
            (None, _) => j += 1,
        }
    }
    if union == 0 {
        0.0
    } else {
        hits as f64 / union as f64
    }
}

fn ratio_table(pred: &[Trajectory], gt: &[Trajectory], px: f64) -> Vec<Vec<f64>> {
    par::map_slice(pred, |p| gt.iter().map(|g| match_ratio(p, g, px)).collect())
}

fn tracking_ap_from_table(
    pred: &[Trajectory],
    n_gt: usize,
    ratios: &[Vec<f64>],
    ratio_threshold: f64,
) -> f64 {
    let confidence: Vec<f64> = pred.iter().map(Trajectory::confidence).collect();
    let mut claimed = vec![false; n_gt];
    let hits: Vec<bool> = rank_by_score(&confidence)
        .into_iter()
        .map(|i| {
            let best = (0..n_gt)
                .filter(|&g| !claimed[g])
                .fold(None, |best: Option<usize>, g| match best {
                    Some(b) if ratios[i][b] >= ratios[i][g] => Some(b),
                    _ => Some(g),
                });
            match best {
                Some(g) if ratios[i][g] > 0.0 && ratios[i][g] >= ratio_threshold => {
                    claimed[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect();
    average_precision(&hits, n_gt)
}

/// Trajectory AP at a match-ratio threshold. Predictions, by descending mean
/// observation score, claim the unclaimed ground-truth trajectory with the
/// highest match ratio; the claim is a true positive when that ratio reaches
/// `ratio_threshold`.
pub fn tracking_ap(
    pred: &[Trajectory],
    gt: &[Trajectory],
    ratio_threshold: f64,
    px_threshold: f64,
) -> f64 {
    let table = ratio_table(pred, gt, px_threshold);
    tracking_ap_from_table(pred, gt.len(), &table, ratio_threshold)
}

/// Mean T-AP over [`T_AP_RATIOS`] with the 25 px segment rule.
pub fn t_map(pred: &[Trajectory], gt: &[Trajectory]) -> f64 {
    let table = ratio_table(pred, gt, SEGMENT_PX);
    T_AP_RATIOS
        .iter()
        .map(|&r| tracking_ap_from_table(pred, gt.len(), &table, r))
        .sum::<f64>()
        / T_AP_RATIOS.len() as f64
}

/// Per-frame point lists reconstructed from trajectories, `frames` long.
pub fn points_by_frame(tracks: &[Trajectory], frames: usize) -> Vec<FramePoints> {
    let mut out: Vec<Vec<Point>> = vec![Vec::new(); frames];
    for t in tracks {
        for o in &t.observations {
            if o.frame < frames {
                out[o.frame].push(o.point);
            }
        }
    }
    out.into_iter().map(FramePoints::new).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// L-AP for every threshold 1..=25 px.
    pub l_ap: BTreeMap<u32, f64>,
    pub l_map: f64,
    /// `(ratio threshold, T-AP)` for each of [`T_AP_RATIOS`].
    pub t_ap: Vec<(f64, f64)>,
    pub t_map: f64,
}

/// Scores predicted trajectories against ground truth over `frame_count`
/// frames (extended if either side has later observations).
pub fn evaluate(pred: &[Trajectory], gt: &[Trajectory], frame_count: usize) -> MetricReport {
    let last = |ts: &[Trajectory]| ts.iter().filter_map(Trajectory::last_frame).max();
    let frames = [last(pred), last(gt)]
        .into_iter()
        .flatten()
        .map(|f| f + 1)
        .fold(frame_count, usize::max);

    let pred_points = points_by_frame(pred, frames);
    let gt_points = points_by_frame(gt, frames);
    let (mae, rmse) = if frames == 0 {
        (0.0, 0.0)
    } else {
        let pc: Vec<usize> = pred_points.iter().map(|p| p.len()).collect();
        let gc: Vec<usize> = gt_points.iter().map(|p| p.len()).collect();
        counting_errors(&pc, &gc).expect("equal non-empty lengths")
    };

    let l_ap = localization_ap_curve(&pred_points, &gt_points);
    let l_map = l_ap.values().sum::<f64>() / l_ap.len() as f64;

    let table = ratio_table(pred, gt, SEGMENT_PX);
    let t_ap: Vec<(f64, f64)> = T_AP_RATIOS
        .iter()
        .map(|&r| (r, tracking_ap_from_table(pred, gt.len(), &table, r)))
        .collect();
    let t_map = t_ap.iter().map(|(_, v)| v).sum::<f64>() / t_ap.len() as f64;

    MetricReport {
        mae,
        rmse,
        l_ap,
        l_map,
        t_ap,
        t_map,
    }
}

impl MetricReport {
    fn fields(&self) -> Vec<(String, f64)> {
        let mut f = vec![
            ("mae".to_string(), self.mae),
            ("rmse".to_string(), self.rmse),
        ];
        for t in L_AP_REPORTED {
            f.push((
                format!("l_ap@{t}"),
                self.l_ap.get(&t).copied().unwrap_or(f64::NAN),
            ));
        }
        f.push(("l_map".into(), self.l_map));
        for &(r, v) in &self.t_ap {
            f.push((format!("t_ap@{r:.2}"), v));
        }
        f.push(("t_map".into(), self.t_map));
        f
    }

    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// CSV header; identical for every report.
    pub fn default_header() -> String {
        let mut keys = vec!["mae".to_string(), "rmse".to_string()];
        keys.extend(L_AP_REPORTED.iter().map(|t| format!("l_ap@{t}")));
        keys.push("l_map".into());
        keys.extend(T_AP_RATIOS.iter().map(|r| format!("t_ap@{r:.2}")));
        keys.push("t_map".into());
        keys.join(",")
    }

    pub fn csv_header(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(k, _)| k)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(points: &[(f64, f64, f64)]) -> FramePoints {
        points
            .iter()
            .map(|&(x, y, s)| Point::new(x, y, s))
            .collect()
    }

    fn track(id: u64, obs: &[(usize, f64, f64)]) -> Trajectory {
        let mut t = Trajectory::new(id);
        for &(f, x, y) in obs {
            t.push(f, Point::new(x, y, 1.0));
        }
        t
    }

    #[test]
    fn counting_examples() {
        assert_eq!(counting_errors(&[3, 4], &[3, 4]).unwrap(), (0.0, 0.0));
        assert_eq!(counting_errors(&[10], &[13]).unwrap(), (3.0, 3.0));
        let (mae, rmse) = counting_errors(&[10, 14], &[12, 10]).unwrap();
        assert_eq!(mae, 3.0);
        assert!((rmse - 10f64.sqrt()).abs() < 1e-12);
        assert!(counting_errors(&[], &[]).is_err());
        assert!(counting_errors(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn exact_localization_is_perfect() {
        let gt = vec![
            frame(&[(5.0, 5.0, 1.0), (20.0, 9.0, 1.0)]),
            frame(&[(7.0, 1.0, 1.0)]),
        ];
        assert_eq!(localization_ap(&gt, &gt, 1.0), 1.0);
        assert_eq!(l_map(&gt, &gt), 1.0);
    }

    #[test]
    fn far_prediction_misses() {
        let gt = vec![frame(&[(50.0, 50.0, 1.0)])];
        let pred = vec![frame(&[(50.0, 80.0, 0.9)])];
        assert_eq!(localization_ap(&pred, &gt, 25.0), 0.0);
    }

    #[test]
    fn empty_cases() {
        assert_eq!(localization_ap(&[], &[], 5.0), 1.0);
        let pred = vec![frame(&[(1.0, 1.0, 0.5)])];
        assert_eq!(localization_ap(&pred, &[FramePoints::default()], 5.0), 0.0);
        let gt = vec![frame(&[(1.0, 1.0, 1.0)])];
        assert_eq!(l_map(&[FramePoints::default()], &gt), 0.0);
        assert_eq!(t_map(&[], &[track(0, &[(0, 1.0, 1.0)])]), 0.0);
    }

    #[test]
    fn match_ratio_counts_union() {
        let g = track(0, &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 0.0)]);
        let p = track(0, &[(1, 3.0, 4.0), (2, 30.0, 0.0), (3, 0.0, 0.0)]);
        // union frames 0..=3, hits only at frame 1
        assert_eq!(match_ratio(&p, &g, 25.0), 0.25);
        assert_eq!(match_ratio(&g, &g, 25.0), 1.0);
    }

    #[test]
    fn identical_tracks_score_one() {
        let gt = vec![
            track(0, &[(0, 1.0, 1.0), (1, 2.0, 2.0)]),
            track(1, &[(0, 50.0, 50.0), (1, 52.0, 51.0)]),
        ];
        for r in T_AP_RATIOS {
            assert_eq!(tracking_ap(&gt, &gt, r, SEGMENT_PX), 1.0);
        }
        assert_eq!(t_map(&gt, &gt), 1.0);
    }

    #[test]
    fn displaced_track_scores_zero() {
        let gt = vec![track(0, &[(0, 0.0, 0.0), (1, 1.0, 0.0)])];
        let pred = vec![track(0, &[(0, 30.0, 0.0), (1, 31.0, 0.0)])];
        assert_eq!(tracking_ap(&pred, &gt, 0.10, SEGMENT_PX), 0.0);
    }

    #[test]
    fn report_has_expected_keys() {
        let gt = vec![track(0, &[(0, 1.0, 1.0), (1, 2.0, 2.0)])];
        let r = evaluate(&gt, &gt, 2);
        let text = r.to_key_value();
        for key in [
            "mae=0",
            "l_ap@10=1",
            "l_map=1",
            "t_ap@0.10=1",
            "t_ap@0.15=1",
            "t_ap@0.20=1",
            "t_map=1",
        ] {
            assert!(text.contains(key), "{key} missing in\n{text}");
        }
        assert_eq!(
            r.csv_header().split(',').count(),
            r.csv_row().split(',').count()
        );
    }
}
