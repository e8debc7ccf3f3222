//! Identity-assignment evaluation for sound-source DoA tracking.
//!
//! The crate simulates intermittent speakers whose direction may jump while
//! they are silent, runs baseline trackers over noisy direction-of-arrival
//! observations, and scores the predictions with frame-level metrics (swaps,
//! broken tracks, MOTA, OSPA) and global association metrics (AssA, AssPr,
//! AssRe) computed over angular distance.

pub mod aggregate;
pub mod assoc_metrics;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod frame_metrics;
pub mod geometry;
pub mod hungarian;
pub mod matching;
pub mod scenesim;
pub mod seeds;
pub mod sweep;
pub mod trackers;
pub mod trackmodel;

pub use error::{Error, Result};
pub use geometry::Direction;
pub use trackmodel::{FrameGrid, ObservationSet, TrackSet};
