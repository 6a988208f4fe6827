//! Dense-crowd multi-object tracking from density maps, motion-position
//! fields and appearance features.
//!
//! The pipeline localizes individuals as density peaks, predicts where each
//! came from using the motion field, fuses the resulting distance with an
//! appearance similarity and links frames with an optimal assignment.

pub mod ablate;
pub mod appearrep;
pub mod associate;
pub mod error;
pub mod iomodel;
pub mod localize;
pub mod matrix;
pub mod metrics;
pub mod motionrep;
pub mod par;
pub mod synth;

pub use error::{Error, Result};
