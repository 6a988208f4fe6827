use std::fmt;

use super::types::SceneBundle;

/// Slack allowed on the unit-norm bound of motion vectors, covering f32
/// rounding of normalized encodings.
pub const MOTION_NORM_SLACK: f64 = 1e-5;

/// One broken invariant, located by frame (when frame-specific) and field.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub frame: Option<usize>,
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    fn bundle(field: &'static str, message: String) -> Self {
        Violation {
            frame: None,
            field,
            message,
        }
    }

    fn at(frame: usize, field: &'static str, message: String) -> Self {
        Violation {
            frame: Some(frame),
            field,
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "frame {i}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Checks every bundle invariant; an empty result means the bundle is valid.
pub fn validate_bundle(bundle: &SceneBundle) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = bundle.frame_count();
    let (w, h) = (bundle.width, bundle.height);

    for (i, d) in bundle.density.iter().enumerate() {
        if (d.height(), d.width()) != (h, w) {
            out.push(Violation::at(
                i,
                "density",
                format!(
                    "dimensions {}x{} differ from bundle {}x{}",
                    d.height(),
                    d.width(),
                    h,
                    w
                ),
            ));
            continue;
        }
        if let Some(p) = d.values().iter().position(|v| !v.is_finite() || *v < 0.0) {
            out.push(Violation::at(
                i,
                "density",
                format!(
                    "value {} at pixel (x={}, y={}) is negative or non-finite",
                    d.values()[p],
                    p % w.max(1),
                    p / w.max(1)
                ),
            ));
        }
    }

    let expected = bundle.expected_motion_fields();
    if bundle.motion.len() != expected {
        out.push(Violation::bundle(
            "motion",
            format!(
                "expected {expected} motion fields, found {}",
                bundle.motion.len()
            ),
        ));
    }
    for (k, m) in bundle.motion.iter().enumerate() {
        let frame = k + 1;
        if (m.height(), m.width()) != (h, w) {
            out.push(Violation::at(
                frame,
                "motion",
                format!(
                    "dimensions {}x{} differ from bundle {}x{}",
                    m.height(),
                    m.width(),
                    h,
                    w
                ),
            ));
            continue;
        }
        let (vx, vy, vz) = m.channels();
        for p in 0..vx.len() {
            let (x, y, z) = (vx[p] as f64, vy[p] as f64, vz[p] as f64);
            let norm = (x * x + y * y + z * z).sqrt();
            let (px, py) = (p % w, p / w);
            if !norm.is_finite() {
                out.push(Violation::at(
                    frame,
                    "motion",
                    format!("non-finite vector at pixel (x={px}, y={py})"),
                ));
                break;
            }
            if norm > 1.0 + MOTION_NORM_SLACK {
                out.push(Violation::at(
                    frame,
                    "motion",
                    format!("vector norm {norm:.6} exceeds 1 at pixel (x={px}, y={py})"),
                ));
                break;
            }
            if z < 0.0 {
                out.push(Violation::at(
                    frame,
                    "motion",
                    format!("negative z component {z} at pixel (x={px}, y={py})"),
                ));
                break;
            }
        }
    }

    if let Some(points) = &bundle.points {
        if points.len() != n {
            out.push(Violation::bundle(
                "points",
                format!("expected {n} point lists, found {}", points.len()),
            ));
        }
        for (i, pts) in points.iter().enumerate() {
            for (j, p) in pts.iter().enumerate() {
                if !p.x.is_finite() || !p.y.is_finite() || !p.in_bounds(w, h) {
                    out.push(Violation::at(
                        i,
                        "points",
                        format!("point {j} at ({}, {}) lies outside {w}x{h}", p.x, p.y),
                    ));
                }
                if !(0.0..=1.0).contains(&p.score) {
                    out.push(Violation::at(
                        i,
                        "points",
                        format!("point {j} score {} outside [0, 1]", p.score),
                    ));
                }
            }
        }
    }

    if let Some(features) = &bundle.features {
        if features.len() != n {
            out.push(Violation::bundle(
                "features",
                format!("expected {n} feature sets, found {}", features.len()),
            ));
        }
        if bundle.points.is_none() && !features.is_empty() {
            out.push(Violation::bundle(
                "features",
                "feature sets present without point lists to align with".into(),
            ));
        }
        let dim = features.first().map(|f| f.dim());
        for (i, f) in features.iter().enumerate() {
            if Some(f.dim()) != dim {
                out.push(Violation::at(
                    i,
                    "features",
                    format!(
                        "dim {} differs from bundle dim {}",
                        f.dim(),
                        dim.unwrap_or(0)
                    ),
                ));
            }
            if let Some(pts) = bundle.points.as_ref().and_then(|p| p.get(i)) {
                if f.count() != pts.len() {
                    out.push(Violation::at(
                        i,
                        "features",
                        format!("count {} does not match {} points", f.count(), pts.len()),
                    ));
                }
            }
            if let Some(p) = f.as_flat().iter().position(|v| !v.is_finite()) {
                out.push(Violation::at(
                    i,
                    "features",
                    format!("non-finite value in vector {}", p / f.dim()),
                ));
            }
        }
    }

    if let Some(images) = &bundle.images {
        if images.len() != n {
            out.push(Violation::bundle(
                "images",
                format!("expected {n} images, found {}", images.len()),
            ));
        }
        for (i, im) in images.iter().enumerate() {
            if (im.height, im.width) != (h, w) {
                out.push(Violation::at(
                    i,
                    "images",
                    format!(
                        "dimensions {}x{} differ from bundle {}x{}",
                        im.height, im.width, h, w
                    ),
                ));
            }
        }
    }

    out
}
