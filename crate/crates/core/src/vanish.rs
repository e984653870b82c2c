//! Horizontal vanishing-point profile `V_px(v)`: sparse estimates from edge
//! orientation, a sliding-band vote accumulator, a DP path through it and a
//! robust quartic fit.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::dp::{DpPath, Smoothness};
use crate::error::{invalid, Result};
use crate::fit::{polyfit, ransac_polyfit, PolyFit, RansacConfig, RansacOutcome};
use crate::grid::Grid;
use crate::math;
use crate::preprocess::EdgeSet;
use crate::road::argmin;

/// A per-row series defined on `first_row..first_row + values.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowProfile {
    pub first_row: usize,
    pub values: Vec<f64>,
}

impl RowProfile {
    pub fn new(first_row: usize, values: Vec<f64>) -> Self {
        Self { first_row, values }
    }

    #[inline]
    pub fn at(&self, v: usize) -> Option<f64> {
        v.checked_sub(self.first_row).and_then(|i| self.values.get(i).copied())
    }

    pub fn last_row(&self) -> Option<usize> {
        (!self.values.is_empty()).then(|| self.first_row + self.values.len() - 1)
    }
}

/// Column range `[-offset, width + offset)` shared by the vote accumulator and
/// the lane energy histogram, with `offset = round(xi * width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColumnFrame {
    pub width: usize,
    pub offset: usize,
}

impl ColumnFrame {
    pub fn new(width: usize, xi: f64) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(invalid("xi must be non-negative"));
        }
        Ok(Self {
            width,
            offset: math::round(xi * width as f64) as usize,
        })
    }

    /// Number of extended columns.
    #[inline]
    pub fn len(&self) -> usize {
        self.width + 2 * self.offset
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn min_column(&self) -> i64 {
        -(self.offset as i64)
    }

    #[inline]
    pub fn max_column(&self) -> i64 {
        (self.width + self.offset) as i64 - 1
    }

    /// Index of an image column in the extended range.
    #[inline]
    pub fn index(&self, column: i64) -> Option<usize> {
        let i = column + self.offset as i64;
        (i >= 0 && (i as usize) < self.len()).then_some(i as usize)
    }

    #[inline]
    pub fn column(&self, index: usize) -> i64 {
        index as i64 - self.offset as i64
    }

    #[inline]
    pub fn clamp(&self, column: i64) -> i64 {
        column.clamp(self.min_column(), self.max_column())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SparseVote {
    pub u: usize,
    pub v: usize,
    /// Estimated vanishing column, rounded and clamped to the frame.
    pub vpx: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseVpxMap {
    pub frame: ColumnFrame,
    pub votes: Vec<SparseVote>,
    /// Edge pixels skipped because `|gx|` was below the gradient floor.
    pub skipped_flat: usize,
    /// Edge pixels skipped because their row has no `V_py`.
    pub skipped_rows: usize,
}

/// Per-edge estimate `vpx = u + (v - V_py(v)) * gy / gx`: the column where the
/// line through the pixel, perpendicular to its gradient, meets row `V_py(v)`.
pub fn sparse_vpx(edges: &EdgeSet, vpy: &RowProfile, frame: ColumnFrame, eps_g: f64) -> SparseVpxMap {
    let mut votes = Vec::with_capacity(edges.len());
    let (mut skipped_flat, mut skipped_rows) = (0, 0);
    for e in &edges.edges {
        if math::abs(e.gx) < eps_g {
            skipped_flat += 1;
            continue;
        }
        let Some(vp) = vpy.at(e.v) else {
            skipped_rows += 1;
            continue;
        };
        let x = e.u as f64 + (e.v as f64 - vp) * e.gy / e.gx;
        // Saturate before the integer cast; far-out values clamp to the edge.
        let bound = (frame.len() + 1) as f64;
        let col = math::round(x.clamp(-bound, bound)) as i64;
        votes.push(SparseVote {
            u: e.u,
            v: e.v,
            vpx: frame.clamp(col),
        });
    }
    SparseVpxMap {
        frame,
        votes,
        skipped_flat,
        skipped_rows,
    }
}

/// Dense vote accumulator `m_x(u, v) = -rho_vote * n(u, v)`, where `n` counts
/// sparse votes for column `u` within the band of rows around `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseVpxAccumulator {
    pub frame: ColumnFrame,
    pub first_row: usize,
    pub last_row: usize,
    pub chi: usize,
    pub rho_vote: f64,
    /// Vote counts; column index per [`ColumnFrame::index`], row `v - first_row`.
    pub counts: Grid<u32>,
}

impl DenseVpxAccumulator {
    /// `m_x` at extended column index `i` and image row `v`.
    #[inline]
    pub fn value(&self, i: usize, v: usize) -> f64 {
        -self.rho_vote * f64::from(self.counts[(i, v - self.first_row)])
    }

    pub fn rows(&self) -> usize {
        self.counts.height()
    }

    pub fn values(&self) -> Grid<f64> {
        self.counts.map(|&c| -self.rho_vote * f64::from(c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.data().iter().all(|&c| c == 0)
    }
}

/// Rows voting into accumulator row `v`: `[v - chi, v + chi]` clipped to
/// `[first, last]`.
pub fn band(v: usize, chi: usize, first: usize, last: usize) -> RangeInclusive<usize> {
    v.saturating_sub(chi).max(first)..=(v + chi).min(last)
}

/// Sweeps a band of `2 chi + 1` rows from the bottom row up to the horizon,
/// updating a single histogram incrementally. Near the bottom the band grows
/// (rows are only added), in the middle it slides (the row `v - chi` enters
/// and the row `v + chi + 1` leaves), and near the horizon it thins (rows
/// only leave). Every row equals a direct count over [`band`].
pub fn accumulate_dense_vpx(
    sparse: &SparseVpxMap,
    chi: usize,
    rho_vote: f64,
    rows: RangeInclusive<usize>,
) -> Result<DenseVpxAccumulator> {
    let (first, last) = (*rows.start(), *rows.end());
    if first > last {
        return Err(invalid("empty row range"));
    }
    if !(rho_vote > 0.0) {
        return Err(invalid("rho_vote must be positive"));
    }
    let frame = sparse.frame;
    let n_rows = last - first + 1;
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    for vote in &sparse.votes {
        if (first..=last).contains(&vote.v) {
            if let Some(i) = frame.index(vote.vpx) {
                by_row[vote.v - first].push(i);
            }
        }
    }
    let mut counts = Grid::filled(frame.len(), n_rows, 0u32);
    let mut hist = vec![0u32; frame.len()];
    for r in band(last, chi, first, last) {
        for &i in &by_row[r - first] {
            hist[i] += 1;
        }
    }
    counts.row_mut(last - first).copy_from_slice(&hist);
    for v in (first..last).rev() {
        if v >= first + chi {
            for &i in &by_row[v - chi - first] {
                hist[i] += 1;
            }
        }
        if v + chi < last {
            for &i in &by_row[v + chi + 1 - first] {
                hist[i] -= 1;
            }
        }
        counts.row_mut(v - first).copy_from_slice(&hist);
    }
    Ok(DenseVpxAccumulator {
        frame,
        first_row: first,
        last_row: last,
        chi,
        rho_vote,
        counts,
    })
}

/// Parameters of the column path search through the accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct UPathParams {
    pub lambda: f64,
    /// Largest column shift between consecutive rows.
    pub max_shift: usize,
    pub smoothness: Smoothness,
}

impl Default for UPathParams {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            max_shift: 5,
            smoothness: Smoothness::Penalty,
        }
    }
}

impl UPathParams {
    #[inline]
    pub fn penalty(&self, shift: isize) -> f64 {
        match self.smoothness {
            Smoothness::Penalty => self.lambda * shift.unsigned_abs() as f64,
            Smoothness::Signed => self.lambda * shift as f64,
        }
    }

    /// Shifts in tie-break order: 0, -1, 1, -2, 2, ...
    fn shifts(&self) -> impl Iterator<Item = isize> {
        let m = self.max_shift as isize;
        core::iter::once(0).chain((1..=m).flat_map(|s| [-s, s]))
    }
}

/// Minimum-energy column path from the bottom row up to the first row:
///
/// `E(u)_v = m_x(u, v) + min_shift [E(u + shift)_{v+1} + penalty(shift)]`.
///
/// Ties prefer the smallest `|shift|`, then the leftmost column. Points are
/// listed from the bottom row upwards as `(column, row)`.
pub fn dp_extract_upath(acc: &DenseVpxAccumulator, params: &UPathParams) -> Result<DpPath> {
    let cols = acc.frame.len();
    let rows = acc.rows();
    if cols == 0 || rows == 0 {
        return Err(invalid("accumulator is empty"));
    }
    let mut backtrace = vec![0i8; cols * rows];
    let mut prev: Vec<f64> = (0..cols).map(|i| acc.value(i, acc.last_row)).collect();
    let mut cur = vec![0.0; cols];
    for v in (acc.first_row..acc.last_row).rev() {
        let r = v - acc.first_row;
        for i in 0..cols {
            let mut best = f64::INFINITY;
            let mut arg = 0isize;
            for s in params.shifts() {
                let j = i as isize + s;
                if j < 0 || j as usize >= cols {
                    continue;
                }
                let e = prev[j as usize] + params.penalty(s);
                if e < best {
                    best = e;
                    arg = s;
                }
            }
            cur[i] = acc.value(i, v) + best;
            backtrace[r * cols + i] = arg as i8;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let (mut i, energy) = argmin(&prev);
    let mut points = Vec::with_capacity(rows);
    points.push((acc.frame.column(i), acc.first_row));
    for v in acc.first_row..acc.last_row {
        i = (i as isize + backtrace[(v - acc.first_row) * cols + i] as isize) as usize;
        points.push((acc.frame.column(i), v + 1));
    }
    points.reverse();
    Ok(DpPath {
        points,
        energy,
        backtrace,
        no_evidence: acc.is_empty(),
    })
}

/// Quartic `V_px(v) = g0 + g1 v + ... + g4 v^4`, fitted on the abscissa
/// `(v - v_center) / v_normalizer` so no power of a raw row index is formed.
#[derive(Clone, Debug, PartialEq)]
pub struct QuarticProfile {
    pub gamma: [f64; 5],
    /// Coefficients in the normalised abscissa.
    pub scaled: [f64; 5],
    pub v_center: f64,
    pub v_normalizer: f64,
    pub kappa: f64,
    /// Rows spanned by the points the profile was fitted to. Outside them
    /// [`QuarticProfile::eval_supported`] holds the value at the nearer end
    /// instead of extrapolating the quartic.
    pub support: Option<(f64, f64)>,
}

impl QuarticProfile {
    fn from_fit(fit: &PolyFit) -> Self {
        let mut gamma = [0.0; 5];
        let mut scaled = [0.0; 5];
        gamma.copy_from_slice(&fit.coefficients);
        scaled.copy_from_slice(&fit.scaled);
        Self {
            gamma,
            scaled,
            v_center: fit.center,
            v_normalizer: fit.normalizer,
            kappa: fit.kappa,
            support: None,
        }
    }

    /// Builds a profile directly from raw coefficients.
    pub fn from_gamma(gamma: [f64; 5]) -> Self {
        Self {
            gamma,
            scaled: gamma,
            v_center: 0.0,
            v_normalizer: 1.0,
            kappa: 1.0,
            support: None,
        }
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        let t = (v - self.v_center) / self.v_normalizer;
        self.scaled.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn eval_supported(&self, v: f64) -> f64 {
        match self.support {
            Some((lo, hi)) => self.eval(v.clamp(lo, hi)),
            None => self.eval(v),
        }
    }
}

/// Least-squares quartic through `(u, v)` points with conditioning factor
/// `kappa` applied to both sides of the normal equations.
pub fn fit_quartic(points: &[(f64, f64)], kappa: f64) -> Result<QuarticProfile> {
    polyfit(points, 4, kappa).map(|f| QuarticProfile::from_fit(&f))
}

/// RANSAC quartic fit to the points of an accumulator path.
pub fn ransac_gamma(path: &DpPath, cfg: &RansacConfig, kappa: f64) -> Result<(QuarticProfile, RansacOutcome)> {
    let points = path.fit_points();
    let outcome = ransac_polyfit(&points, 4, kappa, cfg)?;
    let mut profile = QuarticProfile::from_fit(&outcome.fit);
    let rows = outcome.inliers.iter().map(|&i| points[i].1);
    profile.support = rows.clone().reduce(f64::min).zip(rows.reduce(f64::max));
    Ok((profile, outcome))
}

/// `V_px(v)` for every row of `rows`.
pub fn vpx_profile(profile: &QuarticProfile, rows: RangeInclusive<usize>) -> RowProfile {
    let first_row = *rows.start();
    RowProfile::new(first_row, rows.map(|v| profile.eval_supported(v as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::EdgePixel;

    fn vote_map(frame: ColumnFrame, votes: &[(usize, i64)]) -> SparseVpxMap {
        SparseVpxMap {
            frame,
            votes: votes.iter().map(|&(v, vpx)| SparseVote { u: 0, v, vpx }).collect(),
            skipped_flat: 0,
            skipped_rows: 0,
        }
    }

    #[test]
    fn frame_covers_the_extended_range() {
        let f = ColumnFrame::new(1242, 0.5).unwrap();
        assert_eq!(f.len(), 2484);
        assert_eq!(f.index(-621), Some(0));
        assert_eq!(f.index(-622), None);
        assert_eq!(f.column(2483), 1862);
    }

    #[test]
    fn vertical_edge_points_straight_up() {
        let edges = EdgeSet {
            edges: vec![
                EdgePixel {
                    u: 40,
                    v: 90,
                    gx: 1.2,
                    gy: 0.0,
                    theta: 0.0,
                },
                EdgePixel {
                    u: 41,
                    v: 90,
                    gx: 0.0,
                    gy: 1.0,
                    theta: 0.0,
                },
            ],
        };
        let vpy = RowProfile::new(50, vec![30.0; 60]);
        let m = sparse_vpx(&edges, &vpy, ColumnFrame::new(100, 0.5).unwrap(), 1e-3);
        assert_eq!(m.votes, vec![SparseVote { u: 40, v: 90, vpx: 40 }]);
        assert_eq!(m.skipped_flat, 1);
    }

    #[test]
    fn single_vote_spreads_over_its_band() {
        let frame = ColumnFrame::new(10, 0.5).unwrap();
        let acc = accumulate_dense_vpx(&vote_map(frame, &[(40, 3)]), 5, 1.0, 20..=60).unwrap();
        let i = frame.index(3).unwrap();
        for v in 20..=60 {
            let expected = if (35..=45).contains(&v) { -1.0 } else { 0.0 };
            assert_eq!(acc.value(i, v), expected, "row {v}");
        }
        let empty = accumulate_dense_vpx(&vote_map(frame, &[]), 5, 1.0, 20..=60).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn dominant_column_gives_vertical_path() {
        let frame = ColumnFrame::new(20, 0.5).unwrap();
        let votes: Vec<(usize, i64)> = (0..30).map(|v| (v, 7)).collect();
        let acc = accumulate_dense_vpx(&vote_map(frame, &votes), 2, 1.0, 0..=29).unwrap();
        let path = dp_extract_upath(&acc, &UPathParams::default()).unwrap();
        assert!(path.points.iter().all(|&(u, _)| u == 7));
        assert_eq!(path.points.first(), Some(&(7, 29)));
        assert_eq!(path.points.last(), Some(&(7, 0)));
    }

    #[test]
    fn uniform_accumulator_is_tie_broken_leftmost() {
        let frame = ColumnFrame::new(6, 0.5).unwrap();
        let acc = accumulate_dense_vpx(&vote_map(frame, &[]), 2, 1.0, 0..=4).unwrap();
        let path = dp_extract_upath(&acc, &UPathParams::default()).unwrap();
        assert!(path.no_evidence);
        assert!(path.points.iter().all(|&(u, _)| u == -3));
    }

    #[test]
    fn quartic_interpolates_and_evaluates() {
        let g = [300.0, -1.0, 0.004, 0.0, 0.0];
        let truth = QuarticProfile::from_gamma(g);
        let pts: Vec<(f64, f64)> = [100.0, 150.0, 220.0, 300.0, 370.0]
            .iter()
            .map(|&v| (truth.eval(v), v))
            .collect();
        let fit = fit_quartic(&pts, 1.0).unwrap();
        for &(u, v) in &pts {
            assert!((fit.eval(v) - u).abs() < 1e-9);
        }
        let flat = vpx_profile(&QuarticProfile::from_gamma([100.0, 0.0, 0.0, 0.0, 0.0]), 5..=9);
        assert_eq!(flat.values, vec![100.0; 5]);
        assert!(fit_quartic(&pts[..4], 1.0).is_err());
    }
}
