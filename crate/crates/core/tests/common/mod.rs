//! Brute-force reference implementations, written independently of the
//! library code they check.

#![allow(dead_code)]

use std::collections::HashMap;

use densetrack::iomodel::{DensityMap, Point, Trajectory};

/// Per-frame `(x, y, score)` predictions.
pub type PredFrames = Vec<Vec<(f64, f64, f64)>>;
/// Per-frame `(x, y)` ground truth.
pub type GtFrames = Vec<Vec<(f64, f64)>>;

/// Best total over every way of pairing the smaller side into the larger.
/// Each candidate is summed in row order.
pub fn brute_assignment(cost: &[Vec<f64>]) -> f64 {
    let p = cost.len();
    let q = cost.first().map_or(0, Vec::len);
    if p == 0 || q == 0 {
        return 0.0;
    }
    // `pick[k]` is the partner of the k-th item on the smaller side.
    fn go(
        small: usize,
        large: usize,
        pick: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if pick.len() == small {
            visit(pick);
            return;
        }
        for c in 0..large {
            if !used[c] {
                used[c] = true;
                pick.push(c);
                go(small, large, pick, used, visit);
                pick.pop();
                used[c] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut visit = |pick: &[usize]| {
        let total = if p <= q {
            (0..p).map(|r| cost[r][pick[r]]).sum::<f64>()
        } else {
            let mut row_of = vec![None; p];
            for (c, &r) in pick.iter().enumerate() {
                row_of[r] = Some(c);
            }
            (0..p)
                .filter_map(|r| row_of[r].map(|c| cost[r][c]))
                .sum::<f64>()
        };
        best = best.max(total);
    };
    go(
        p.min(q),
        p.max(q),
        &mut Vec::new(),
        &mut vec![false; p.max(q)],
        &mut visit,
    );
    best
}

/// AP as the area under the step precision-recall curve.
pub fn pr_area(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return if hits.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0.0;
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (k, &h) in hits.iter().enumerate() {
        if h {
            tp += 1.0;
        }
        let precision = tp / (k as f64 + 1.0);
        let recall = tp / n_gt as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Indices by descending score; equal scores keep input order.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    idx
}

/// `pred[f]` holds `(x, y, score)`, `gt[f]` holds `(x, y)`.
pub fn brute_l_ap(pred: &[Vec<(f64, f64, f64)>], gt: &[Vec<(f64, f64)>], thr: f64) -> f64 {
    let mut pooled = Vec::new();
    for (f, ps) in pred.iter().enumerate() {
        for &p in ps {
            pooled.push((f, p));
        }
    }
    let scores: Vec<f64> = pooled.iter().map(|(_, p)| p.2).collect();
    let mut taken: HashMap<(usize, usize), bool> = HashMap::new();
    let mut hits = Vec::new();
    for i in ranked(&scores) {
        let (f, (x, y, _)) = pooled[i];
        let mut best: Option<(usize, f64)> = None;
        for (g, &(gx, gy)) in gt
            .get(f)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .enumerate()
        {
            if taken.contains_key(&(f, g)) {
                continue;
            }
            let d = ((x - gx) * (x - gx) + (y - gy) * (y - gy)).sqrt();
            if d <= thr && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((g, d));
            }
        }
        if let Some((g, _)) = best {
            taken.insert((f, g), true);
        }
        hits.push(best.is_some());
    }
    pr_area(&hits, gt.iter().map(Vec::len).sum())
}

pub fn brute_ratio(a: &Trajectory, b: &Trajectory, px: f64) -> f64 {
    let fa: HashMap<usize, Point> = a.observations.iter().map(|o| (o.frame, o.point)).collect();
    let fb: HashMap<usize, Point> = b.observations.iter().map(|o| (o.frame, o.point)).collect();
    let mut frames: Vec<usize> = fa.keys().chain(fb.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();
    if frames.is_empty() {
        return 0.0;
    }
    let close = frames
        .iter()
        .filter(|f| match (fa.get(f), fb.get(f)) {
            (Some(p), Some(q)) => ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt() <= px,
            _ => false,
        })
        .count();
    close as f64 / frames.len() as f64
}

pub fn brute_t_ap(pred: &[Trajectory], gt: &[Trajectory], ratio: f64, px: f64) -> f64 {
    let conf: Vec<f64> = pred
        .iter()
        .map(|t| {
            t.observations.iter().map(|o| o.point.score).sum::<f64>() / t.observations.len() as f64
        })
        .collect();
    let mut taken = vec![false; gt.len()];
    let mut hits = Vec::new();
    for i in ranked(&conf) {
        let mut best: Option<(usize, f64)> = None;
        for (g, t) in gt.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let r = brute_ratio(&pred[i], t, px);
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((g, r));
            }
        }
        let hit = matches!(best, Some((_, r)) if r > 0.0 && r >= ratio);
        if hit {
            taken[best.unwrap().0] = true;
        }
        hits.push(hit);
    }
    pr_area(&hits, gt.len())
}

/// Peaks by direct definition: window maximum, above threshold, and the
/// first pixel in row-major order of its equal-value 8-connected region.
pub fn brute_peaks(map: &DensityMap, window: usize, rel: f64, abs: f64) -> Vec<(usize, usize)> {
    let (w, h) = (map.width(), map.height());
    let gmax = map.values().iter().fold(0.0f32, |m, &v| m.max(v)) as f64;
    let thr = abs.max(rel * gmax);
    let r = (window / 2) as isize;
    let at = |c: isize, rr: isize| -> Option<f32> {
        (c >= 0 && rr >= 0 && (c as usize) < w && (rr as usize) < h)
            .then(|| map.get(c as usize, rr as usize))
    };
    let mut out = Vec::new();
    for row in 0..h as isize {
        for col in 0..w as isize {
            let v = at(col, row).unwrap();
            if v <= 0.0 || (v as f64) < thr {
                continue;
            }
            let dominated =
                (-r..=r).any(|dy| (-r..=r).any(|dx| at(col + dx, row + dy).is_some_and(|u| u > v)));
            if dominated {
                continue;
            }
            // Flood the plateau and see whether anything precedes this pixel.
            let mut stack = vec![(col, row)];
            let mut seen = vec![(col, row)];
            let mut first = true;
            while let Some((c, rr)) = stack.pop() {
                if (rr, c) < (row, col) {
                    first = false;
                    break;
                }
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let n = (c + dx, rr + dy);
                        if at(n.0, n.1) == Some(v) && !seen.contains(&n) {
                            seen.push(n);
                            stack.push(n);
                        }
                    }
                }
            }
            if first {
                out.push((col as usize, row as usize));
            }
        }
    }
    out
}

pub fn traj(id: u64, obs: &[(usize, f64, f64, f64)]) -> Trajectory {
    let mut t = Trajectory::new(id);
    for &(f, x, y, s) in obs {
        t.push(f, Point::new(x, y, s));
    }
    t
}
