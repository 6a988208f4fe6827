//! Ablation sweeps: run the tracker under several settings against the same
//! ground truth and tabulate the metric reports.

use std::fmt;
use std::str::FromStr;

use crate::associate::track_sequence;
use crate::error::{Error, Result};
use crate::iomodel::{Matcher, PipelineConfig, RetrievalBackend, SceneBundle, Trajectory};
use crate::metrics::{evaluate, MetricReport};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sweep {
    Lambda,
    Backend,
    Mode,
}

impl Sweep {
    pub const ALL: [Sweep; 3] = [Sweep::Lambda, Sweep::Backend, Sweep::Mode];

    pub fn as_str(&self) -> &'static str {
        match self {
            Sweep::Lambda => "lambda",
            Sweep::Backend => "backend",
            Sweep::Mode => "mode",
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Sweep::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown sweep `{s}` (expected lambda, backend or mode)"
                ))
            })
    }
}

/// Component arms of the mode sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Motion distance alone.
    MotionOnly,
    /// Appearance similarity alone.
    AppearanceOnly,
    FusedGreedy,
    FusedHungarian,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::MotionOnly,
        Mode::AppearanceOnly,
        Mode::FusedGreedy,
        Mode::FusedHungarian,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::MotionOnly => "motion-only",
            Mode::AppearanceOnly => "appearance-only",
            Mode::FusedGreedy => "fused-greedy",
            Mode::FusedHungarian => "fused-hungarian",
        }
    }

    /// `base` with the fusion weight and matcher this arm prescribes. The
    /// fused arms keep the base lambda.
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut c = base.clone();
        match self {
            Mode::MotionOnly => {
                c.lambda = 1.0;
                c.matcher = Matcher::Hungarian;
            }
            Mode::AppearanceOnly => {
                c.lambda = 0.0;
                c.matcher = Matcher::Hungarian;
            }
            Mode::FusedGreedy => c.matcher = Matcher::Greedy,
            Mode::FusedHungarian => c.matcher = Matcher::Hungarian,
        }
        c
    }
}

/// One setting of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub sweep: Sweep,
    pub label: String,
    pub config: PipelineConfig,
}

/// `0.0, 0.1, …, 1.0`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn lambda_arms(base: &PipelineConfig, lambdas: &[f64]) -> Vec<Arm> {
    lambdas
        .iter()
        .map(|&l| Arm {
            sweep: Sweep::Lambda,
            label: format!("{l:.1}"),
            config: PipelineConfig {
                lambda: l,
                ..base.clone()
            },
        })
        .collect()
}

pub fn arms(sweep: Sweep, base: &PipelineConfig) -> Vec<Arm> {
    match sweep {
        Sweep::Lambda => lambda_arms(base, &lambda_grid()),
        Sweep::Backend => [
            RetrievalBackend::Cosine,
            RetrievalBackend::Euclidean,
            RetrievalBackend::Diffusion,
        ]
        .into_iter()
        .map(|b| Arm {
            sweep,
            label: b.as_str().to_string(),
            config: PipelineConfig {
                retrieval: b,
                ..base.clone()
            },
        })
        .collect(),
        Sweep::Mode => Mode::ALL
            .into_iter()
            .map(|m| Arm {
                sweep,
                label: m.as_str().to_string(),
                config: m.apply(base),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmResult {
    pub arm: Arm,
    pub tracks: usize,
    pub report: MetricReport,
}

/// Tracks and evaluates every arm. Arms run concurrently; each is
/// deterministic on its own so the output order and values do not depend on
/// scheduling.
pub fn run_arms(
    bundle: &SceneBundle,
    ground_truth: &[Trajectory],
    arms: &[Arm],
) -> Result<Vec<ArmResult>> {
    par::map_slice(arms, |arm| {
        let tracks = track_sequence(bundle, &arm.config)?;
        Ok(ArmResult {
            arm: arm.clone(),
            tracks: tracks.len(),
            report: evaluate(&tracks, ground_truth, bundle.frame_count()),
        })
    })
    .into_iter()
    .collect()
}

/// Max minus min T-mAP over the given results.
pub fn t_map_spread(results: &[ArmResult]) -> f64 {
    let (lo, hi) = results
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.report.t_map), hi.max(r.report.t_map))
        });
    if results.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// CSV table, one row per arm. `t_map_spread` is computed within each sweep
/// and repeated on each of its rows.
pub fn to_csv(results: &[ArmResult]) -> String {
    let metric_header = MetricReport::default_header();
    let mut out =
        format!("sweep,setting,lambda,retrieval,matcher,tracks,{metric_header},t_map_spread\n");
    for r in results {
        let same: Vec<ArmResult> = results
            .iter()
            .filter(|o| o.arm.sweep == r.arm.sweep)
            .cloned()
            .collect();
        let c = &r.arm.config;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.arm.sweep,
            r.arm.label,
            c.lambda,
            c.retrieval,
            c.matcher,
            r.tracks,
            r.report.csv_row(),
            t_map_spread(&same)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scenario, ScenarioConfig};

    #[test]
    fn grid_sizes() {
        let base = PipelineConfig::default();
        assert_eq!(arms(Sweep::Lambda, &base).len(), 11);
        assert_eq!(lambda_grid()[9], 0.9);
        let backends: Vec<String> = arms(Sweep::Backend, &base)
            .into_iter()
            .map(|a| a.label)
            .collect();
        assert_eq!(backends, ["cosine", "euclidean", "diffusion"]);
        let modes = arms(Sweep::Mode, &base);
        assert_eq!(modes[0].label, "motion-only");
        assert_eq!(modes[0].config.lambda, 1.0);
        assert_eq!(modes[1].config.lambda, 0.0);
        assert_eq!(modes[2].config.matcher, Matcher::Greedy);
        assert_eq!(modes[3].config.lambda, 0.9);
    }

    #[test]
    fn unknown_sweep_is_rejected() {
        assert_eq!("mode".parse::<Sweep>().unwrap(), Sweep::Mode);
        assert!(matches!("gamma".parse::<Sweep>(), Err(Error::Config(_))));
    }

    #[test]
    fn csv_has_one_row_per_arm() {
        let s = generate_scenario(&ScenarioConfig {
            n_agents: 6,
            n_frames: 5,
            width: 96,
            height: 96,
            min_spacing: 20.0,
            ..ScenarioConfig::standard()
        })
        .unwrap();
        let arms = arms(Sweep::Backend, &PipelineConfig::default());
        let results = run_arms(&s.bundle, &s.ground_truth, &arms).unwrap();
        let csv = to_csv(&results);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].ends_with("t_map,t_map_spread"));
        let width = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == width));
        assert!(t_map_spread(&results) >= 0.0);
        assert_eq!(t_map_spread(&[]), 0.0);
    }
}
