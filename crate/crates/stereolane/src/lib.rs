//! Stereo lane detection: configuration, image IO, the staged pipeline, a
//! benchmark harness and a synthetic-scene test kit built on
//! [`stereolane_core`].
//!
//! ```no_run
//! use std::path::Path;
//! use stereolane::{config::PipelineConfig, io::read_gray, pipeline::run_pipeline};
//!
//! let left = read_gray(Path::new("left.png")).unwrap();
//! let right = read_gray(Path::new("right.png")).unwrap();
//! let det = run_pipeline(&left, &right, &PipelineConfig::default()).unwrap();
//! for lane in &det.lanes.lanes {
//!     println!("lane at column {} (energy {:.1})", lane.start_column, lane.energy);
//! }
//! ```

pub mod bench;
pub mod config;
pub mod io;
pub mod output;
pub mod pipeline;
pub mod testkit;

pub use stereolane_core as core;
