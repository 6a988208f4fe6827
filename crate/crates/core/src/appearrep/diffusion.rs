//! Diffusion retrieval over the union of two frames' feature vectors.
//!
//! Affinities are clipped cosines raised to `gamma`, kept only between mutual
//! k-nearest neighbours. With `S = D^-1/2 W D^-1/2`, each next-frame item
//! `j` is scored by solving `(I - alpha S) f = e_j`; the previous-frame
//! entries of `f` form column `j` of the similarity matrix, which is then
//! min-max rescaled into `[0, 1]` (a constant matrix becomes all 0.5).

use super::{cosine, norm, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::iomodel::{DiffusionParams, FeatureSet};
use crate::matrix::Matrix;
use crate::par;

pub const CG_MAX_ITERATIONS: usize = 1000;
pub const CG_TOLERANCE: f64 = 1e-8;

/// Normalized mutual-kNN affinity graph.
#[derive(Clone, Debug)]
pub struct DiffusionGraph {
    alpha: f64,
    /// `adjacency[u]` holds `(v, S_uv)` sorted by `v`.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl DiffusionGraph {
    pub fn build(vectors: &[&[f32]], params: &DiffusionParams) -> Self {
        let n = vectors.len();
        let norms: Vec<f64> = vectors.iter().map(|v| norm(v)).collect();
        let k = params.knn_k.min(n.saturating_sub(1));

        let cos = Matrix::from_fn(n, n, |u, v| {
            cosine(vectors[u], norms[u], vectors[v], norms[v])
        });

        // Neighbour lists: best cosine first, ties to the lower index.
        let neighbours: Vec<Vec<usize>> = par::map_range(n, |u| {
            let mut others: Vec<usize> = (0..n).filter(|&v| v != u).collect();
            others.sort_by(|&a, &b| cos.get(u, b).total_cmp(&cos.get(u, a)).then(a.cmp(&b)));
            others.truncate(k);
            others.sort_unstable();
            others
        });

        let mut weights: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for u in 0..n {
            for &v in &neighbours[u] {
                if v > u && neighbours[v].binary_search(&u).is_ok() {
                    let w = cos.get(u, v).max(0.0).powf(params.gamma);
                    if w > 0.0 {
                        weights[u].push((v, w));
                        weights[v].push((u, w));
                    }
                }
            }
        }
        let degree: Vec<f64> = weights
            .iter()
            .map(|row| row.iter().map(|&(_, w)| w).sum())
            .collect();
        let adjacency = weights
            .into_iter()
            .enumerate()
            .map(|(u, mut row)| {
                row.sort_unstable_by_key(|&(v, _)| v);
                row.into_iter()
                    .map(|(v, w)| {
                        let d = degree[u] * degree[v];
                        (v, if d > 0.0 { w / d.sqrt() } else { 0.0 })
                    })
                    .collect()
            })
            .collect();
        DiffusionGraph {
            alpha: params.alpha,
            adjacency,
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// `out = (I - alpha S) x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (u, row) in self.adjacency.iter().enumerate() {
            let s: f64 = row.iter().map(|&(v, w)| w * x[v]).sum();
            out[u] = x[u] - self.alpha * s;
        }
    }

    /// `I - alpha S` as a dense matrix.
    pub fn dense_operator(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::zeros(n, n);
        for (u, row) in self.adjacency.iter().enumerate() {
            m.set(u, u, 1.0);
            for &(v, w) in row {
                m.set(u, v, m.get(u, v) - self.alpha * w);
            }
        }
        m
    }

    /// Conjugate-gradient solve of `(I - alpha S) f = e_query`.
    pub fn solve(&self, query: usize) -> Result<Vec<f64>> {
        let n = self.len();
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        r[query] = 1.0;
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rs = dot(&r, &r);
        let mut iterations = 0;
        while rs.sqrt() > CG_TOLERANCE && iterations < CG_MAX_ITERATIONS {
            self.apply(&p, &mut ap);
            let step = rs / dot(&p, &ap);
            for i in 0..n {
                x[i] += step * p[i];
                r[i] -= step * ap[i];
            }
            let next = dot(&r, &r);
            let beta = next / rs;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rs = next;
            iterations += 1;
        }
        if rs.sqrt() > CG_TOLERANCE {
            return Err(Error::NoConvergence {
                iterations,
                residual: rs.sqrt(),
            });
        }
        Ok(x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw diffusion scores, before rescaling: entry `(k, j)` is the stationary
/// mass at previous item `k` for next-frame query `j`.
pub fn diffusion_scores(
    prev: &FeatureSet,
    next: &FeatureSet,
    params: &DiffusionParams,
) -> Result<Matrix> {
    if prev.dim() != next.dim() {
        return Err(Error::Shape(format!(
            "feature dims differ: {} vs {}",
            prev.dim(),
            next.dim()
        )));
    }
    if !(params.alpha > 0.0 && params.alpha < 1.0) || params.knn_k == 0 {
        return Err(Error::Config(format!(
            "diffusion needs 0 < alpha < 1 and knn_k >= 1, got alpha={} knn_k={}",
            params.alpha, params.knn_k
        )));
    }
    let (p, q) = (prev.count(), next.count());
    if p == 0 || q == 0 {
        return Ok(Matrix::zeros(p, q));
    }
    let vectors: Vec<&[f32]> = prev.iter().chain(next.iter()).collect();
    let graph = DiffusionGraph::build(&vectors, params);
    let columns = par::map_range(q, |j| graph.solve(p + j));
    let mut out = Matrix::zeros(p, q);
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        for (k, &v) in col.iter().take(p).enumerate() {
            out.set(k, j, v);
        }
    }
    Ok(out)
}

pub fn similarity_diffusion(
    prev: &FeatureSet,
    next: &FeatureSet,
    params: &DiffusionParams,
) -> Result<SimilarityMatrix> {
    let raw = diffusion_scores(prev, next, params)?;
    SimilarityMatrix::new(raw.rescaled_unit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[Vec<f32>]) -> FeatureSet {
        FeatureSet::from_rows(rows[0].len(), rows)
    }

    #[test]
    fn single_pair_is_degenerate_half() {
        let s = similarity_diffusion(
            &set(&[vec![1.0, 2.0]]),
            &set(&[vec![0.3, -1.0]]),
            &DiffusionParams::default(),
        )
        .unwrap();
        assert_eq!(s.shape(), (1, 1));
        assert_eq!(s.get(0, 0), 0.5);
    }

    #[test]
    fn orthogonal_identities_keep_cosine_ranking() {
        let e = |i: usize| {
            let mut v = vec![0.0f32; 4];
            v[i] = 1.0;
            v
        };
        let prev = set(&[e(0), e(1), e(2)]);
        let next = set(&[e(2), e(0), e(1)]);
        let s = similarity_diffusion(&prev, &next, &DiffusionParams::default()).unwrap();
        // row k's best column is where the same basis vector sits
        let best: Vec<usize> = (0..3)
            .map(|k| {
                (0..3)
                    .max_by(|&a, &b| s.get(k, a).total_cmp(&s.get(k, b)))
                    .unwrap()
            })
            .collect();
        assert_eq!(best, vec![1, 2, 0]);
    }

    #[test]
    fn solve_residual_is_small() {
        let rows: Vec<Vec<f32>> = (0..12)
            .map(|i| {
                (0..6)
                    .map(|d| ((i * 7 + d * 3) % 11) as f32 - 5.0)
                    .collect()
            })
            .collect();
        let vectors: Vec<&[f32]> = rows.iter().map(|r| r.as_slice()).collect();
        let g = DiffusionGraph::build(&vectors, &DiffusionParams::default());
        let a = g.dense_operator();
        for q in 0..12 {
            let f = g.solve(q).unwrap();
            let res: f64 = (0..12)
                .map(|u| {
                    let ax: f64 = (0..12).map(|v| a.get(u, v) * f[v]).sum();
                    let e = if u == q { 1.0 } else { 0.0 };
                    (ax - e).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-6, "residual {res}");
        }
    }

    #[test]
    fn empty_side_gives_empty_matrix() {
        let s = similarity_diffusion(
            &FeatureSet::empty(3),
            &set(&[vec![1.0, 0.0, 0.0]]),
            &DiffusionParams::default(),
        )
        .unwrap();
        assert_eq!(s.shape(), (0, 1));
    }
}
