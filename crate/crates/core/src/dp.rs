//! Shared pieces of the two dynamic-programming path extractors.

use alloc::vec::Vec;

/// Sign convention of the smoothness term `lambda * step`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Smoothness {
    /// `+lambda * |step|`: larger jumps cost more.
    #[default]
    Penalty,
    /// Signed, without the absolute value: `-lambda * step` for the
    /// v-disparity path and `+lambda * shift` for the vanishing-point path.
    /// Jumps can lower the energy, so paths favour large steps.
    Signed,
}

/// Minimum-energy path through a 2D accumulator, one point per DP stage.
#[derive(Clone, Debug, PartialEq)]
pub struct DpPath {
    /// `(axis coordinate, row)` per stage, in stage order.
    pub points: Vec<(i64, usize)>,
    /// Total energy of the path.
    pub energy: f64,
    /// Chosen step per accumulator cell, stage-major.
    pub backtrace: Vec<i8>,
    /// Set when the accumulator held no evidence at all.
    pub no_evidence: bool,
}

impl DpPath {
    /// Points as `(value, row)` pairs ready for curve fitting.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|&(a, r)| (a as f64, r as f64)).collect()
    }
}
