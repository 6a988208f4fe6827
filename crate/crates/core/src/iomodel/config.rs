use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Appearance similarity backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RetrievalBackend {
    Diffusion,
    Cosine,
    Euclidean,
}

impl RetrievalBackend {
    pub const ALL: [RetrievalBackend; 3] = [
        RetrievalBackend::Cosine,
        RetrievalBackend::Euclidean,
        RetrievalBackend::Diffusion,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RetrievalBackend::Diffusion => "diffusion",
            RetrievalBackend::Cosine => "cosine",
            RetrievalBackend::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for RetrievalBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrievalBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(RetrievalBackend::Diffusion),
            "cosine" => Ok(RetrievalBackend::Cosine),
            "euclidean" => Ok(RetrievalBackend::Euclidean),
            other => Err(Error::Config(format!(
                "unknown retrieval backend {other:?} (expected cosine, euclidean or diffusion)"
            ))),
        }
    }
}

/// Bipartite matcher applied to the fused score matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Matcher {
    /// Optimal assignment.
    Hungarian,
    /// Rows in ascending order each take their best unused column.
    Greedy,
}

impl Matcher {
    pub fn as_str(&self) -> &'static str {
        match self {
            Matcher::Hungarian => "hungarian",
            Matcher::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hungarian" => Ok(Matcher::Hungarian),
            "greedy" => Ok(Matcher::Greedy),
            other => Err(Error::Config(format!(
                "unknown matcher {other:?} (expected hungarian or greedy)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffusionParams {
    /// Damping factor, strictly between 0 and 1.
    pub alpha: f64,
    /// Neighbourhood size; capped at `n - 1` for an `n`-item graph.
    pub knn_k: usize,
    /// Exponent applied to clipped cosine affinities.
    pub gamma: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            alpha: 0.9,
            knn_k: 10,
            gamma: 3.0,
        }
    }
}

/// Every tunable of the tracking pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Weight of the motion distance in the fused score, in `[0, 1]`.
    pub lambda: f64,
    pub retrieval: RetrievalBackend,
    pub matcher: Matcher,
    /// Matched pairs whose fused score falls below this are dissolved.
    pub gate_score: f64,
    pub peak_window: usize,
    pub peak_rel_threshold: f64,
    pub peak_abs_threshold: f64,
    pub patch_size: usize,
    pub diffusion: DiffusionParams,
    /// Reserved for stochastic backends; the built-in stages are
    /// deterministic and do not draw from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lambda: 0.9,
            retrieval: RetrievalBackend::Diffusion,
            matcher: Matcher::Hungarian,
            gate_score: -0.45,
            peak_window: 3,
            peak_rel_threshold: 0.3,
            peak_abs_threshold: 0.02,
            patch_size: 20,
            diffusion: DiffusionParams::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.peak_window < 3 || self.peak_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "peak window must be odd and at least 3, got {}",
                self.peak_window
            )));
        }
        if !(0.0..=1.0).contains(&self.peak_rel_threshold) {
            return Err(Error::Config(format!(
                "relative peak threshold must lie in [0, 1], got {}",
                self.peak_rel_threshold
            )));
        }
        if self.peak_abs_threshold.is_nan() || self.peak_abs_threshold < 0.0 {
            return Err(Error::Config(format!(
                "absolute peak threshold must be non-negative, got {}",
                self.peak_abs_threshold
            )));
        }
        if self.patch_size == 0 {
            return Err(Error::Config("patch size must be at least 1".into()));
        }
        if self.gate_score.is_nan() {
            return Err(Error::Config("gate score must not be NaN".into()));
        }
        let d = &self.diffusion;
        if !(d.alpha > 0.0 && d.alpha < 1.0) {
            return Err(Error::Config(format!(
                "diffusion alpha must lie in (0, 1), got {}",
                d.alpha
            )));
        }
        if d.knn_k == 0 {
            return Err(Error::Config("diffusion knn_k must be at least 1".into()));
        }
        if !d.gamma.is_finite() || d.gamma <= 0.0 {
            return Err(Error::Config(format!(
                "diffusion gamma must be positive, got {}",
                d.gamma
            )));
        }
        Ok(())
    }

    /// Whether the similarity stage contributes anything to the fused score.
    pub fn uses_appearance(&self) -> bool {
        self.lambda < 1.0
    }

    /// Resolved configuration as `key=value` lines, in a fixed order.
    pub fn describe(&self) -> String {
        format!(
            "lambda={}\nretrieval={}\nmatcher={}\ngate_score={}\npeak_window={}\n\
             peak_rel_threshold={}\npeak_abs_threshold={}\npatch_size={}\n\
             alpha={}\nknn_k={}\ngamma={}\nseed={}\n",
            self.lambda,
            self.retrieval,
            self.matcher,
            self.gate_score,
            self.peak_window,
            self.peak_rel_threshold,
            self.peak_abs_threshold,
            self.patch_size,
            self.diffusion.alpha,
            self.diffusion.knn_k,
            self.diffusion.gamma,
            self.seed,
        )
    }
}
