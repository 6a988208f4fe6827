//! Domain types, pipeline configuration and the interchange formats that
//! connect the engine to producers, the scenario generator and the metrics.

mod config;
mod format;
mod types;
mod validate;

pub use config::{DiffusionParams, Matcher, PipelineConfig, RetrievalBackend};
pub use format::{
    density_file, features_file, image_file, motion_file, points_file, read_bundle, read_density,
    read_features, read_motion, read_pgm, read_points, read_tracks, write_bundle, write_density,
    write_features, write_motion, write_pgm, write_points, write_tracks, FORMAT_VERSION, MANIFEST,
};
pub use types::{
    DensityMap, FeatureSet, FramePoints, GrayImage, MotionField, Observation, Point, SceneBundle,
    Trajectory,
};
pub use validate::{validate_bundle, Violation, MOTION_NORM_SLACK};
