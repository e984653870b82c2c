//! Vertical road profile: v-disparity histogram, DP path extraction and a
//! robust parabola `d = f(v) = b0 + b1 v + b2 v^2`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::dp::{DpPath, Smoothness};
use crate::error::{invalid, Error, Result};
use crate::fit::{polyfit, ransac_polyfit, RansacConfig, RansacOutcome};
use crate::grid::{DisparityMap, Grid, INVALID_DISPARITY};
use crate::math;

/// Per-row disparity histogram `m_y(d, v)`; bin 0 is never filled.
#[derive(Clone, Debug, PartialEq)]
pub struct VDisparityHist {
    counts: Grid<u32>,
}

impl VDisparityHist {
    /// Wraps a `(d_max + 1) x rows` count grid.
    pub fn from_counts(counts: Grid<u32>) -> Self {
        Self { counts }
    }

    pub fn rows(&self) -> usize {
        self.counts.height()
    }

    pub fn bins(&self) -> usize {
        self.counts.width()
    }

    pub fn d_max(&self) -> usize {
        self.bins().saturating_sub(1)
    }

    #[inline]
    pub fn count(&self, d: usize, v: usize) -> u32 {
        self.counts[(d, v)]
    }

    pub fn counts(&self) -> &Grid<u32> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.data().iter().all(|&c| c == 0)
    }
}

/// Counts valid disparities per row. Values above `d_max` are ignored.
pub fn build_vdisparity(disp: &DisparityMap, d_max: u16) -> VDisparityHist {
    let bins = usize::from(d_max) + 1;
    let mut counts = Grid::filled(bins, disp.height(), 0u32);
    for v in 0..disp.height() {
        for &d in disp.row(v) {
            if d != INVALID_DISPARITY && d <= d_max {
                counts[(usize::from(d), v)] += 1;
            }
        }
    }
    VDisparityHist { counts }
}

/// Parameters of the v-disparity path search.
#[derive(Clone, Debug, PartialEq)]
pub struct VPathParams {
    pub lambda: f64,
    /// Largest row step between consecutive disparity stages.
    pub max_step: usize,
    pub smoothness: Smoothness,
}

impl Default for VPathParams {
    fn default() -> Self {
        Self {
            lambda: 30.0,
            max_step: 6,
            smoothness: Smoothness::Penalty,
        }
    }
}

impl VPathParams {
    #[inline]
    pub fn penalty(&self, step: usize) -> f64 {
        let s = self.lambda * step as f64;
        match self.smoothness {
            Smoothness::Penalty => s,
            Smoothness::Signed => -s,
        }
    }
}

/// Minimum-energy road path through the v-disparity histogram.
///
/// Stages run from `d_max` down to 1. The cell `(d, v)` is reached from
/// `(d + 1, v + step)` with `step` in `0..=max_step`, since the road
/// disparity grows towards the bottom of the image:
///
/// `E(v)_d = -m_y(d, v) + min_step [E(v + step)_{d+1} + penalty(step)]`.
///
/// Ties prefer the smaller step, and the smaller row at the last stage.
pub fn dp_extract_vpath(hist: &VDisparityHist, params: &VPathParams) -> Result<DpPath> {
    let rows = hist.rows();
    let d_max = hist.d_max();
    if rows == 0 || d_max == 0 {
        return Err(invalid("histogram needs at least one row and one non-zero bin"));
    }
    let mut backtrace = vec![0i8; (d_max + 1) * rows];
    let mut prev: Vec<f64> = (0..rows).map(|v| -f64::from(hist.count(d_max, v))).collect();
    let mut cur = vec![0.0; rows];
    for d in (1..d_max).rev() {
        for v in 0..rows {
            let mut best = f64::INFINITY;
            let mut arg = 0;
            for step in 0..=params.max_step.min(rows - 1 - v) {
                let e = prev[v + step] + params.penalty(step);
                if e < best {
                    best = e;
                    arg = step;
                }
            }
            cur[v] = -f64::from(hist.count(d, v)) + best;
            backtrace[d * rows + v] = arg as i8;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let (mut v, energy) = argmin(&prev);
    let mut points = Vec::with_capacity(d_max);
    points.push((1i64, v));
    for d in 1..d_max {
        v += backtrace[d * rows + v] as usize;
        points.push((d as i64 + 1, v));
    }
    points.reverse();
    Ok(DpPath {
        points,
        energy,
        backtrace,
        no_evidence: hist.is_empty(),
    })
}

/// First index of the smallest value.
pub(crate) fn argmin(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &e) in values.iter().enumerate().skip(1) {
        if e < best.1 {
            best = (i, e);
        }
    }
    best
}

/// Least-squares parabola through `(d, v)` points.
pub fn fit_parabola_lsq(points: &[(f64, f64)]) -> Result<[f64; 3]> {
    let fit = polyfit(points, 2, 1.0)?;
    Ok([fit.coefficients[0], fit.coefficients[1], fit.coefficients[2]])
}

/// RANSAC parabola fit to the points of a v-disparity path.
pub fn ransac_beta(path: &DpPath, cfg: &RansacConfig) -> Result<([f64; 3], RansacOutcome)> {
    let outcome = ransac_polyfit(&path.fit_points(), 2, 1.0, cfg)?;
    let c = &outcome.fit.coefficients;
    Ok(([c[0], c[1], c[2]], outcome))
}

#[inline]
pub fn eval_parabola(beta: &[f64; 3], v: f64) -> f64 {
    beta[0] + v * (beta[1] + v * beta[2])
}

#[inline]
pub fn parabola_slope(beta: &[f64; 3], v: f64) -> f64 {
    beta[1] + 2.0 * beta[2] * v
}

/// Row of the vanishing point for lanes crossing row `v`: where the tangent
/// of the road profile at `v` reaches zero disparity.
pub fn vpy_at(beta: &[f64; 3], v: f64) -> Result<f64> {
    let slope = parabola_slope(beta, v);
    if math::abs(slope) < 1e-12 {
        return Err(Error::SingularProfile {
            row: math::round(v.max(0.0)) as usize,
        });
    }
    Ok(v - eval_parabola(beta, v) / slope)
}

/// `V_py(v)` for every row of `rows`.
pub fn vpy_profile(beta: &[f64; 3], rows: RangeInclusive<usize>) -> Result<Vec<f64>> {
    rows.map(|v| vpy_at(beta, v as f64)).collect()
}

/// Row where the road profile reaches zero disparity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Horizon {
    pub row: usize,
    /// Set when no root with positive slope lies in `[0, v_max]` and the
    /// row was clamped.
    pub clamped: bool,
}

/// Root of `f(v) = 0` with `f'(v) > 0`, rounded and clamped to `[0, v_max]`.
pub fn horizon_row(beta: &[f64; 3], v_max: usize) -> Horizon {
    let [b0, b1, b2] = *beta;
    let disc = b1 * b1 - 4.0 * b0 * b2;
    let clamped = Horizon { row: 0, clamped: true };
    if disc < 0.0 {
        return clamped;
    }
    // Root with f' = +sqrt(disc), written without cancellation.
    let denom = b1 + math::sqrt(disc);
    if !(denom > 0.0) {
        return clamped;
    }
    let root = -2.0 * b0 / denom;
    let r = math::round(root);
    if r < 0.0 {
        clamped
    } else if r > v_max as f64 {
        Horizon {
            row: v_max,
            clamped: true,
        }
    } else {
        Horizon {
            row: r as usize,
            clamped: false,
        }
    }
}

/// Fitted vertical road profile with its valid row interval.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadProfile {
    pub beta: [f64; 3],
    pub horizon: Horizon,
    pub v_max: usize,
}

impl RoadProfile {
    /// Checks that the profile increases strictly over `[horizon, v_max]`.
    pub fn new(beta: [f64; 3], v_max: usize) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("non-finite road profile coefficient"));
        }
        let horizon = horizon_row(&beta, v_max);
        for v in horizon.row..=v_max {
            let slope = parabola_slope(&beta, v as f64);
            if math::abs(slope) < 1e-12 {
                return Err(Error::SingularProfile { row: v });
            }
            if slope < 0.0 {
                return Err(Error::NonMonotoneProfile { row: v });
            }
        }
        Ok(Self { beta, horizon, v_max })
    }

    #[inline]
    pub fn disparity(&self, v: f64) -> f64 {
        eval_parabola(&self.beta, v)
    }

    pub fn horizon_row(&self) -> usize {
        self.horizon.row
    }

    pub fn rows(&self) -> RangeInclusive<usize> {
        self.horizon.row..=self.v_max
    }

    /// `V_py` over the valid rows, first entry at the horizon.
    pub fn vpy(&self) -> Result<Vec<f64>> {
        vpy_profile(&self.beta, self.rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist_from(rows: usize, d_max: usize, cells: &[(usize, usize, u32)]) -> VDisparityHist {
        let mut g = Grid::filled(d_max + 1, rows, 0);
        for &(d, v, c) in cells {
            g[(d, v)] = c;
        }
        VDisparityHist::from_counts(g)
    }

    #[test]
    fn uniform_row_fills_one_bin() {
        let disp = Grid::filled(100, 1, 7u16);
        let h = build_vdisparity(&disp, 64);
        assert_eq!(h.count(7, 0), 100);
        let total: u32 = h.counts().data().iter().sum();
        assert_eq!(total, 100);
        assert!(build_vdisparity(&Grid::filled(5, 3, 0u16), 64).is_empty());
    }

    #[test]
    fn path_follows_populated_cells() {
        // One cell per disparity along a decreasing row sequence.
        let rows = 30;
        let cells: Vec<_> = (1..=10).map(|d| (d, 5 + 2 * d, 100)).collect();
        let path = dp_extract_vpath(&hist_from(rows, 10, &cells), &VPathParams::default()).unwrap();
        let expected: Vec<(i64, usize)> = (1..=10).rev().map(|d| (d as i64, 5 + 2 * d)).collect();
        assert_eq!(path.points, expected);
        assert_eq!(path.energy, -1000.0 + 9.0 * 2.0 * 30.0);
        assert!(!path.no_evidence);
    }

    #[test]
    fn empty_histogram_is_flagged_and_tie_broken() {
        let path = dp_extract_vpath(&hist_from(8, 4, &[]), &VPathParams::default()).unwrap();
        assert!(path.no_evidence);
        assert_eq!(path.energy, 0.0);
        assert_eq!(path.points, vec![(4, 0), (3, 0), (2, 0), (1, 0)]);
    }

    #[test]
    fn vpy_examples() {
        for v in [0.0, 100.0, 375.0] {
            assert!((vpy_at(&[-75.0, 0.5, 0.0], v).unwrap() - 150.0).abs() < 1e-12);
        }
        let got = vpy_at(&[10.0, 0.1, 0.002], 300.0).unwrap();
        assert!((got - (300.0 - 220.0 / 1.3)).abs() < 1e-9);
        assert!(matches!(
            vpy_profile(&[1.0, 0.0, 0.0], 0..=3),
            Err(Error::SingularProfile { row: 0 })
        ));
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(
            horizon_row(&[-50.0, 0.5, 0.0], 300),
            Horizon {
                row: 100,
                clamped: false
            }
        );
        assert_eq!(horizon_row(&[0.0, 1.0, 0.0], 300), Horizon { row: 0, clamped: false });
        assert_eq!(horizon_row(&[10.0, 1.0, 0.0], 300), Horizon { row: 0, clamped: true });
        let h = horizon_row(&[-40.0, 0.4, 0.0005], 359);
        assert_eq!(h.row, 90);
    }

    #[test]
    fn road_profile_rejects_decreasing_profiles() {
        assert!(RoadProfile::new([-40.0, 0.4, 0.0005], 359).is_ok());
        assert!(matches!(
            RoadProfile::new([10.0, 0.5, -0.0021], 359),
            Err(Error::NonMonotoneProfile { .. })
        ));
    }

    #[test]
    fn parabola_fit_and_ransac_agree_on_clean_data() {
        let beta = [10.0, 0.2, 0.001];
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let v = 50.0 + 7.0 * i as f64;
                (eval_parabola(&beta, v), v)
            })
            .collect();
        let lsq = fit_parabola_lsq(&pts).unwrap();
        for (a, b) in lsq.iter().zip(beta) {
            assert!((a - b).abs() < 1e-9);
        }
        let path = DpPath {
            points: Vec::new(),
            energy: 0.0,
            backtrace: Vec::new(),
            no_evidence: false,
        };
        assert!(matches!(
            ransac_beta(&path, &RansacConfig::road()),
            Err(Error::TooFewPoints { .. })
        ));
    }
}
