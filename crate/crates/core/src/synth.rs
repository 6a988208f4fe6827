//! Synthetic scenarios with known ground truth, and overlay rendering.
//!
//! Agents move with a fixed heading, a per-frame speed of
//! `speed_mean ± speed_jitter`, reflect off the arena borders and never come
//! closer than `min_spacing` to each other (a blocked agent reverses, or
//! waits). Density maps are superposed unit Gaussians; motion fields are
//! encoded from the true correspondences; point lists are the density peaks
//! and each peak carries the feature of the agent it sits on.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::iomodel::{DensityMap, FeatureSet, FramePoints, Point, SceneBundle, Trajectory};
use crate::localize::{extract_peaks, PeakParams};
use crate::motionrep::{encode_mpm, MpmParams};
use crate::par;

const PLACEMENT_ATTEMPTS: usize = 10_000;
const FEATURE_ATTEMPTS: usize = 1_000;
/// Gaussians are rendered out to this many sigmas.
const RENDER_SIGMAS: f64 = 5.0;
/// A peak farther than this from every agent gets a random feature.
const PEAK_ASSIGN_PX: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub n_frames: usize,
    pub width: usize,
    pub height: usize,
    pub speed_mean: f64,
    pub speed_jitter: f64,
    pub blob_sigma: f64,
    pub min_spacing: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub distractor_correlation: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// The crowded reference scenario used by the acceptance suite.
    pub fn standard() -> Self {
        ScenarioConfig {
            n_agents: 50,
            n_frames: 100,
            width: 512,
            height: 512,
            speed_mean: 2.0,
            speed_jitter: 1.0,
            blob_sigma: 3.0,
            min_spacing: 12.0,
            feature_dim: 64,
            feature_noise: 0.15,
            distractor_correlation: 0.3,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("arena {}x{} is empty", self.width, self.height));
        }
        if self.feature_dim < 2 {
            return bad(format!(
                "feature dim must be at least 2, got {}",
                self.feature_dim
            ));
        }
        if self.blob_sigma.is_nan() || self.blob_sigma <= 0.0 {
            return bad(format!(
                "blob sigma must be positive, got {}",
                self.blob_sigma
            ));
        }
        if !self.min_spacing.is_finite() || self.min_spacing < 0.0 {
            return bad(format!(
                "min spacing must be non-negative, got {}",
                self.min_spacing
            ));
        }
        if !self.speed_mean.is_finite()
            || !self.speed_jitter.is_finite()
            || self.speed_mean < 0.0
            || self.speed_jitter < 0.0
        {
            return bad("speeds must be non-negative".into());
        }
        if self.feature_noise.is_nan() || self.feature_noise < 0.0 {
            return bad(format!(
                "feature noise must be non-negative, got {}",
                self.feature_noise
            ));
        }
        if !(0.0..1.0).contains(&self.distractor_correlation) {
            return bad(format!(
                "distractor correlation must lie in [0, 1), got {}",
                self.distractor_correlation
            ));
        }
        if self.speed_mean + self.speed_jitter > self.mpm_params().radius {
            return bad(format!(
                "per-frame displacement up to {} exceeds the motion encoding radius {}",
                self.speed_mean + self.speed_jitter,
                self.mpm_params().radius
            ));
        }
        Ok(())
    }

    /// Motion encoding scale tied to the blob size: sigma, radius 3 sigma.
    pub fn mpm_params(&self) -> MpmParams {
        MpmParams {
            sigma: self.blob_sigma,
            radius: 3.0 * self.blob_sigma,
        }
    }
}

/// A generated scenario and its ground-truth trajectories (id = agent index).
#[derive(Clone, Debug)]
pub struct Scenario {
    pub bundle: SceneBundle,
    pub ground_truth: Vec<Trajectory>,
    /// Unit base appearance vector of every agent.
    pub base_features: Vec<Vec<f32>>,
}

fn unit(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vectors with pairwise cosine at most `max_cos`. Candidates that
/// violate the bound have the offending directions projected out before
/// being retried.
fn base_features(
    rng: &mut ChaCha8Rng,
    count: usize,
    dim: usize,
    max_cos: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut bases: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        'attempt: for _ in 0..FEATURE_ATTEMPTS {
            let mut v = gaussian_vector(rng, dim);
            if !unit(&mut v) {
                continue;
            }
            for _ in 0..=dim {
                let worst = bases
                    .iter()
                    .map(|b| (dot(&v, b), b))
                    .filter(|(c, _)| *c > max_cos)
                    .max_by(|a, b| a.0.total_cmp(&b.0));
                match worst {
                    None => {
                        accepted = Some(v);
                        break 'attempt;
                    }
                    Some((c, b)) => {
                        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                        if !unit(&mut v) {
                            continue 'attempt;
                        }
                    }
                }
            }
        }
        match accepted {
            Some(v) => bases.push(v),
            None => {
                return Err(Error::Infeasible(format!(
                    "cannot draw {count} features of dim {dim} with pairwise cosine <= {max_cos}"
                )))
            }
        }
    }
    Ok(bases)
}

fn place_agents(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> Result<Vec<(f64, f64)>> {
    let (xmax, ymax) = ((cfg.width - 1) as f64, (cfg.height - 1) as f64);
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(cfg.n_agents);
    for a in 0..cfg.n_agents {
        let spot = (0..PLACEMENT_ATTEMPTS).find_map(|_| {
            let p = (rng.random_range(0.0..=xmax), rng.random_range(0.0..=ymax));
            placed
                .iter()
                .all(|q| (p.0 - q.0).hypot(p.1 - q.1) >= cfg.min_spacing)
                .then_some(p)
        });
        match spot {
            Some(p) => placed.push(p),
            None => {
                return Err(Error::Infeasible(format!(
                    "placed {a} of {} agents with spacing {} in a {}x{} arena",
                    cfg.n_agents, cfg.min_spacing, cfg.width, cfg.height
                )))
            }
        }
    }
    Ok(placed)
}

fn reflect(x: f64, max: f64, heading: &mut f64) -> f64 {
    if x < 0.0 {
        *heading = -*heading;
        (-x).min(max)
    } else if x > max {
        *heading = -*heading;
        (2.0 * max - x).max(0.0)
    } else {
        x
    }
}

/// Agent positions for every frame: `paths[frame][agent]`.
fn simulate(rng: &mut ChaCha8Rng, cfg: &ScenarioConfig) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut pos = place_agents(rng, cfg)?;
    let mut heading: Vec<(f64, f64)> = (0..cfg.n_agents)
        .map(|_| {
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            (t.cos(), t.sin())
        })
        .collect();
    let (xmax, ymax) = ((cfg.width - 1) as f64, (cfg.height - 1) as f64);
    let spaced = |pos: &[(f64, f64)], a: usize, p: (f64, f64)| {
        pos.iter()
            .enumerate()
            .all(|(b, q)| b == a || (p.0 - q.0).hypot(p.1 - q.1) >= cfg.min_spacing)
    };

    let mut paths = Vec::with_capacity(cfg.n_frames);
    if cfg.n_frames > 0 {
        paths.push(pos.clone());
    }
    for _ in 1..cfg.n_frames {
        for a in 0..cfg.n_agents {
            let speed = (cfg.speed_mean
                + if cfg.speed_jitter > 0.0 {
                    rng.random_range(-cfg.speed_jitter..=cfg.speed_jitter)
                } else {
                    0.0
                })
            .max(0.0);
            let mut moved = false;
            for reverse in [false, true] {
                let mut h = heading[a];
                if reverse {
                    h = (-h.0, -h.1);
                }
                let x = reflect(pos[a].0 + speed * h.0, xmax, &mut h.0);
                let y = reflect(pos[a].1 + speed * h.1, ymax, &mut h.1);
                if spaced(&pos, a, (x, y)) {
                    pos[a] = (x, y);
                    heading[a] = h;
                    moved = true;
                    break;
                }
            }
            if !moved {
                heading[a] = (-heading[a].0, -heading[a].1);
            }
        }
        paths.push(pos.clone());
    }
    Ok(paths)
}

/// Superposed unit-amplitude Gaussians.
pub fn render_density(
    height: usize,
    width: usize,
    centers: &[(f64, f64)],
    sigma: f64,
) -> DensityMap {
    let mut values = vec![0.0f64; height * width];
    let reach = RENDER_SIGMAS * sigma;
    let two_s2 = 2.0 * sigma * sigma;
    for &(cx, cy) in centers {
        let c0 = (cx - reach).floor().max(0.0) as usize;
        let r0 = (cy - reach).floor().max(0.0) as usize;
        let c1 = ((cx + reach).ceil().max(0.0) as usize).min(width.saturating_sub(1));
        let r1 = ((cy + reach).ceil().max(0.0) as usize).min(height.saturating_sub(1));
        for r in r0..=r1 {
            for c in c0..=c1 {
                let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
                values[r * width + c] += (-d2 / two_s2).exp();
            }
        }
    }
    DensityMap::from_values(
        height,
        width,
        values.into_iter().map(|v| v as f32).collect(),
    )
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bases = base_features(
        &mut rng,
        cfg.n_agents,
        cfg.feature_dim,
        cfg.distractor_correlation,
    )?;
    let paths = simulate(&mut rng, cfg)?;
    let (w, h) = (cfg.width, cfg.height);

    let ground_truth: Vec<Trajectory> = (0..cfg.n_agents)
        .map(|a| {
            let mut t = Trajectory::new(a as u64);
            for (f, frame) in paths.iter().enumerate() {
                t.push(f, Point::new(frame[a].0, frame[a].1, 1.0));
            }
            t
        })
        .collect();

    let density = par::map_slice(&paths, |frame| render_density(h, w, frame, cfg.blob_sigma));

    let as_points = |frame: &Vec<(f64, f64)>| -> Vec<Point> {
        frame.iter().map(|&(x, y)| Point::new(x, y, 1.0)).collect()
    };
    let identity: Vec<Option<usize>> = (0..cfg.n_agents).map(Some).collect();
    let mpm = cfg.mpm_params();
    let motion = par::map_range(paths.len().saturating_sub(1), |k| {
        encode_mpm(
            &as_points(&paths[k]),
            &as_points(&paths[k + 1]),
            &identity,
            &mpm,
            h,
            w,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let peak_params = PeakParams::default();
    let points: Vec<FramePoints> = par::map_slice(&density, |d| extract_peaks(d, &peak_params));

    // Features are drawn frame by frame so the RNG stream is schedule-free.
    let dim = cfg.feature_dim;
    let noise_scale = cfg.feature_noise / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(points.len());
    for (f, pts) in points.iter().enumerate() {
        let mut rows = Vec::with_capacity(pts.len());
        for p in pts.iter() {
            let owner = paths[f]
                .iter()
                .enumerate()
                .map(|(a, q)| (a, (p.x - q.0).hypot(p.y - q.1)))
                .filter(|&(_, d)| d <= PEAK_ASSIGN_PX)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let mut v: Vec<f64> = match owner {
                Some((a, _)) => {
                    let noise = gaussian_vector(&mut rng, dim);
                    bases[a]
                        .iter()
                        .zip(noise)
                        .map(|(b, n)| b + noise_scale * n)
                        .collect()
                }
                None => gaussian_vector(&mut rng, dim),
            };
            unit(&mut v);
            rows.push(v.into_iter().map(|x| x as f32).collect::<Vec<f32>>());
        }
        features.push(FeatureSet::from_rows(dim, &rows));
    }

    let bundle = SceneBundle {
        width: w,
        height: h,
        density,
        points: Some(points),
        features: Some(features),
        motion,
        images: None,
    };
    Ok(Scenario {
        bundle,
        ground_truth,
        base_features: bases
            .into_iter()
            .map(|b| b.into_iter().map(|x| x as f32).collect())
            .collect(),
    })
}

/// 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn get(&self, col: usize, row: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM (`P6`).
    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)
            .and_then(|_| w.write_all(&self.pixels))
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Saturated marker colour for a track id. Hues step by the golden ratio so
/// nearby ids land far apart on the colour wheel.
pub fn id_color(id: u64) -> [u8; 3] {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let hue = (id as f64 * GOLDEN).fract() * 6.0;
    let (s, v) = (0.85, 1.0);
    let sector = hue.floor() as u32 % 6;
    let f = hue - hue.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// Grayscale density background with a 3x3 marker per trajectory observed in
/// `frame`.
pub fn render_overlay(
    bundle: &SceneBundle,
    trajectories: &[Trajectory],
    frame: usize,
) -> Result<RgbImage> {
    let density = bundle.density.get(frame).ok_or_else(|| {
        Error::OutOfRange(format!(
            "frame {frame} (bundle has {})",
            bundle.frame_count()
        ))
    })?;
    let (w, h) = (density.width(), density.height());
    let peak = density.max();
    let mut img = RgbImage {
        width: w,
        height: h,
        pixels: Vec::with_capacity(3 * w * h),
    };
    for &v in density.values() {
        let g = if peak > 0.0 {
            ((v / peak).clamp(0.0, 1.0) * 255.0).round() as u8
        } else {
            0
        };
        img.pixels.extend_from_slice(&[g, g, g]);
    }
    for t in trajectories {
        let Some(p) = t.at_frame(frame) else { continue };
        if !p.in_bounds(w, h) {
            continue;
        }
        let (c, r) = p.pixel(w, h);
        let color = id_color(t.id);
        for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                img.set(cc, rr, color);
            }
        }
    }
    Ok(img)
}
