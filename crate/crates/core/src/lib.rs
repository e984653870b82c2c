//! Stereo-vision lane detection building blocks.
//!
//! The crate is `no_std` (with `alloc`) and purely computational: every
//! function takes in-memory rasters and returns new ones. File formats,
//! configuration and orchestration live in the `stereolane` crate.
//!
//! Pipeline order:
//!
//! 1. [`stereo`]: memoised NCC block matching with search-range propagation
//!    and a left-right consistency check.
//! 2. [`road`]: v-disparity histogram, dynamic-programming path extraction
//!    and a RANSAC parabola fit of the vertical road profile.
//! 3. [`preprocess`]: road masking, bilateral filtering and Sobel edges.
//! 4. [`vanish`]: sparse and dense horizontal vanishing-point estimation.
//! 5. [`lanes`]: lane position validation by energy aggregation.
//!
//! Enable the `parallel` feature to spread per-pixel work over rayon's pool.
//! Results do not depend on the number of threads.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dp;
pub mod error;
pub mod fit;
pub mod grid;
pub mod lanes;
mod math;
mod par;
pub mod preprocess;
pub mod road;
pub mod stereo;
pub mod vanish;

pub use error::{Error, Result};
pub use grid::{DisparityMap, GrayImage, Grid, RealMap, INVALID_DISPARITY};
