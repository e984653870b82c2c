//! Disparity estimation: memoised NCC block matching, search-range
//! propagation (SRP) and the left-right consistency (LRC) check.

mod integral;
mod lrc;
mod matching;
mod stats;

pub use integral::{block_sum, build_integral, IntegralImage};
pub use lrc::lrc_check;
pub use matching::{
    estimate_disparity_full, estimate_disparity_naive, estimate_disparity_srp, estimate_right_disparity_srp, ncc_cost,
    ncc_direct, search_range, MatchContext, SearchRange,
};
pub use stats::{precompute_stats, BlockStats};

use crate::error::{invalid, Result};

/// Block matching parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoConfig {
    /// Block half-size; blocks are `(2 rho + 1)` pixels square.
    pub rho: usize,
    pub d_min: u16,
    pub d_max: u16,
    /// Search-range propagation bound.
    pub tau: u16,
    /// Left-right consistency threshold in pixels.
    pub tr_lrc: u16,
    /// Blocks whose standard deviation falls below this are unmatchable.
    pub sigma_floor: f64,
}

impl Default for StereoConfig {
    fn default() -> Self {
        Self {
            rho: 3,
            d_min: 0,
            d_max: 64,
            tau: 1,
            tr_lrc: 3,
            sigma_floor: 1e-4,
        }
    }
}

impl StereoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max <= self.d_min {
            return Err(invalid("d_max must exceed d_min"));
        }
        if !(self.sigma_floor > 0.0) {
            return Err(invalid("sigma_floor must be positive"));
        }
        Ok(())
    }
}
