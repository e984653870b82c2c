use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{DisparityMap, GrayImage, Grid, INVALID_DISPARITY};
use crate::math;
use crate::par;

use super::stats::{precompute_stats, BlockStats};
use super::StereoConfig;

/// Left image, right image and their memoised block statistics.
#[derive(Clone, Debug)]
pub struct MatchContext<'a> {
    left: &'a GrayImage,
    right: &'a GrayImage,
    stats_left: BlockStats,
    stats_right: BlockStats,
    sigma_floor: f64,
}

/// Which view's pixels are being assigned disparities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum View {
    /// Left pixel `(u, v)` matches right pixel `(u - d, v)`.
    Left,
    /// Right pixel `(x, v)` matches left pixel `(x + d, v)`.
    Right,
}

impl<'a> MatchContext<'a> {
    /// Computes the block statistics of both views once.
    pub fn new(left: &'a GrayImage, right: &'a GrayImage, rho: usize, sigma_floor: f64) -> Result<Self> {
        if left.width() != right.width() || left.height() != right.height() {
            return Err(Error::SizeMismatch);
        }
        let stats_left = precompute_stats(left, rho)?;
        let stats_right = precompute_stats(right, rho)?;
        Ok(Self {
            left,
            right,
            stats_left,
            stats_right,
            sigma_floor,
        })
    }

    pub fn stats_left(&self) -> &BlockStats {
        &self.stats_left
    }

    pub fn stats_right(&self) -> &BlockStats {
        &self.stats_right
    }

    #[inline]
    fn rho(&self) -> usize {
        self.stats_left.rho
    }

    /// NCC between the left block at `(u, v)` and the right block at
    /// `(u - d, v)`, or `None` when either block is flatter than the floor.
    pub fn cost(&self, u: isize, v: isize, d: isize) -> Result<Option<f64>> {
        let rho = self.rho();
        let r = rho as isize;
        let (w, h) = (self.left.width() as isize, self.left.height() as isize);
        if u - r < 0 || v - r < 0 || u + r >= w || v + r >= h {
            return Err(Error::BlockOutOfBounds { u, v, rho });
        }
        let ur = u - d;
        if ur - r < 0 || ur + r >= w {
            return Err(Error::BlockOutOfBounds { u: ur, v, rho });
        }
        Ok(self.cost_unchecked(u as usize, v as usize, d as usize))
    }

    #[inline]
    fn cost_unchecked(&self, u: usize, v: usize, d: usize) -> Option<f64> {
        factorised_ncc(
            self.left,
            self.right,
            &self.stats_left,
            &self.stats_right,
            u,
            v,
            d,
            self.sigma_floor,
        )
    }

    fn match_pixel(&self, view: View, u: usize, v: usize, candidates: impl Iterator<Item = u16>) -> u16 {
        let rho = self.rho();
        let w = self.left.width();
        if u < rho || u + rho >= w {
            return INVALID_DISPARITY;
        }
        let own_sigma = match view {
            View::Left => self.stats_left.sigma_at(u, v),
            View::Right => self.stats_right.sigma_at(u, v),
        };
        if own_sigma < self.sigma_floor {
            return INVALID_DISPARITY;
        }
        let mut best: Option<(u16, f64)> = None;
        for d in candidates {
            let du = d as usize;
            let cost = match view {
                View::Left => {
                    if u < du + rho {
                        continue;
                    }
                    self.cost_unchecked(u, v, du)
                }
                View::Right => {
                    if u + du + rho >= w {
                        continue;
                    }
                    self.cost_unchecked(u + du, v, du)
                }
            };
            if let Some(c) = cost {
                // Ascending candidates with a strict comparison: ties keep
                // the smaller disparity.
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((d, c));
                }
            }
        }
        best.map_or(INVALID_DISPARITY, |(d, _)| d)
    }

    fn check_rows(&self) -> Result<()> {
        let rho = self.rho();
        if self.left.height() < 2 * rho + 1 || self.left.width() < 2 * rho + 1 {
            return Err(Error::ImageTooSmall {
                width: self.left.width(),
                height: self.left.height(),
                rho,
            });
        }
        Ok(())
    }

    fn srp(&self, cfg: &StereoConfig, view: View) -> Result<DisparityMap> {
        cfg.validate()?;
        self.check_rows()?;
        let (w, h) = (self.left.width(), self.left.height());
        let rho = self.rho();
        let mut out = Grid::filled(w, h, INVALID_DISPARITY);
        let first = h - 1 - rho;
        let full = SearchRange::full(cfg.d_min, cfg.d_max);
        let row = par::map_range(w, |u| self.match_pixel(view, u, first, full.iter()));
        out.row_mut(first).copy_from_slice(&row);
        for v in (rho..first).rev() {
            let prev: &[u16] = out.row(v + 1);
            let row = par::map_range(w, |u| {
                let sr = search_range(prev, u, cfg.tau, cfg.d_min, cfg.d_max);
                self.match_pixel(view, u, v, sr.iter())
            });
            out.row_mut(v).copy_from_slice(&row);
        }
        Ok(out)
    }

    /// Left disparity map with search-range propagation, bottom row first.
    pub fn left_srp(&self, cfg: &StereoConfig) -> Result<DisparityMap> {
        self.srp(cfg, View::Left)
    }

    /// Right disparity map with search-range propagation; blocks shift the
    /// opposite way and the memoised statistics are reused.
    pub fn right_srp(&self, cfg: &StereoConfig) -> Result<DisparityMap> {
        self.srp(cfg, View::Right)
    }

    /// Left disparity map searched over the whole `[d_min, d_max]` range.
    pub fn left_full(&self, cfg: &StereoConfig) -> Result<DisparityMap> {
        cfg.validate()?;
        self.check_rows()?;
        let (w, h) = (self.left.width(), self.left.height());
        let rho = self.rho();
        let full = SearchRange::full(cfg.d_min, cfg.d_max);
        let data = par::map_rows(h, |v| {
            if v < rho || v + rho >= h {
                return alloc::vec![INVALID_DISPARITY; w];
            }
            (0..w)
                .map(|u| self.match_pixel(View::Left, u, v, full.iter()))
                .collect()
        });
        Grid::from_vec(w, h, data)
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn factorised_ncc(
    left: &GrayImage,
    right: &GrayImage,
    stats_l: &BlockStats,
    stats_r: &BlockStats,
    u: usize,
    v: usize,
    d: usize,
    sigma_floor: f64,
) -> Option<f64> {
    let ur = u - d;
    let sigma_l = stats_l.sigma_at(u, v);
    let sigma_r = stats_r.sigma_at(ur, v);
    if sigma_l < sigma_floor || sigma_r < sigma_floor {
        return None;
    }
    let rho = stats_l.rho;
    let side = 2 * rho + 1;
    let n = (side * side) as f64;
    let mut dot = 0.0;
    for j in v - rho..=v + rho {
        let lrow = &left.row(j)[u - rho..=u + rho];
        let rrow = &right.row(j)[ur - rho..=ur + rho];
        dot += lrow.iter().zip(rrow).map(|(a, b)| a * b).sum::<f64>();
    }
    let mu_l = stats_l.mean_at(u, v);
    let mu_r = stats_r.mean_at(ur, v);
    Some((dot - n * mu_l * mu_r) / (n * sigma_l * sigma_r))
}

/// Factorised NCC cost: only `sum(I_l * I_r)` is computed per call; means
/// and deviations come from the memoised statistics.
///
/// Returns `Ok(None)` when either block's deviation is below `sigma_floor`.
#[allow(clippy::too_many_arguments)]
pub fn ncc_cost(
    left: &GrayImage,
    right: &GrayImage,
    stats_l: &BlockStats,
    stats_r: &BlockStats,
    u: isize,
    v: isize,
    d: isize,
    sigma_floor: f64,
) -> Result<Option<f64>> {
    if !left.grid().same_size(right.grid()) {
        return Err(Error::SizeMismatch);
    }
    let rho = stats_l.rho;
    let r = rho as isize;
    let (w, h) = (left.width() as isize, left.height() as isize);
    for (cu, name_u) in [(u, u), (u - d, u - d)] {
        if cu - r < 0 || v - r < 0 || cu + r >= w || v + r >= h {
            return Err(Error::BlockOutOfBounds { u: name_u, v, rho });
        }
    }
    Ok(factorised_ncc(
        left,
        right,
        stats_l,
        stats_r,
        u as usize,
        v as usize,
        d as usize,
        sigma_floor,
    ))
}

/// Textbook NCC: block means and deviations are recomputed from the pixels
/// on every call.
pub fn ncc_direct(
    left: &GrayImage,
    right: &GrayImage,
    u: usize,
    v: usize,
    d: usize,
    rho: usize,
    sigma_floor: f64,
) -> Option<f64> {
    let ur = u - d;
    let side = 2 * rho + 1;
    let n = (side * side) as f64;
    let (mut sl, mut sr) = (0.0, 0.0);
    for j in v - rho..=v + rho {
        sl += left.row(j)[u - rho..=u + rho].iter().sum::<f64>();
        sr += right.row(j)[ur - rho..=ur + rho].iter().sum::<f64>();
    }
    let (mu_l, mu_r) = (sl / n, sr / n);
    let (mut cross, mut var_l, mut var_r) = (0.0, 0.0, 0.0);
    for j in v - rho..=v + rho {
        let lrow = &left.row(j)[u - rho..=u + rho];
        let rrow = &right.row(j)[ur - rho..=ur + rho];
        for (a, b) in lrow.iter().zip(rrow) {
            let (da, db) = (a - mu_l, b - mu_r);
            cross += da * db;
            var_l += da * da;
            var_r += db * db;
        }
    }
    let sigma_l = math::sqrt(var_l / n);
    let sigma_r = math::sqrt(var_r / n);
    if sigma_l < sigma_floor || sigma_r < sigma_floor {
        return None;
    }
    Some(cross / (n * sigma_l * sigma_r))
}

/// Union of up to three clamped disparity intervals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchRange {
    lo: [u16; 3],
    hi: [u16; 3],
    len: usize,
}

impl SearchRange {
    pub fn full(d_min: u16, d_max: u16) -> Self {
        Self {
            lo: [d_min, 0, 0],
            hi: [d_max, 0, 0],
            len: 1,
        }
    }

    /// `[l - tau, l + tau]` for every neighbour disparity `l`, clamped to
    /// `[d_min, d_max]`. Falls back to the full range when nothing survives
    /// the clamp.
    pub fn propagate(neighbours: &[u16], tau: u16, d_min: u16, d_max: u16) -> Self {
        let mut out = Self {
            lo: [0; 3],
            hi: [0; 3],
            len: 0,
        };
        for &l in neighbours.iter().take(3) {
            let lo = l.saturating_sub(tau).max(d_min);
            let hi = l.saturating_add(tau).min(d_max);
            if lo <= hi {
                out.lo[out.len] = lo;
                out.hi[out.len] = hi;
                out.len += 1;
            }
        }
        if out.len == 0 {
            Self::full(d_min, d_max)
        } else {
            out
        }
    }

    pub fn contains(&self, d: u16) -> bool {
        (0..self.len).any(|k| self.lo[k] <= d && d <= self.hi[k])
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u16> + '_ {
        let lo = self.lo[..self.len].iter().copied().min().unwrap_or(1);
        let hi = self.hi[..self.len].iter().copied().max().unwrap_or(0);
        (lo..=hi).filter(move |&d| self.contains(d))
    }

    pub fn to_vec(&self) -> Vec<u16> {
        self.iter().collect()
    }
}

/// Search range at column `u` propagated from the previous (lower) row's
/// disparities at `u - 1`, `u` and `u + 1`.
pub fn search_range(prev_row: &[u16], u: usize, tau: u16, d_min: u16, d_max: u16) -> SearchRange {
    let lo = u.saturating_sub(1);
    let hi = (u + 2).min(prev_row.len());
    SearchRange::propagate(&prev_row[lo..hi], tau, d_min, d_max)
}

/// Left disparity map by NCC matching with search-range propagation.
pub fn estimate_disparity_srp(left: &GrayImage, right: &GrayImage, cfg: &StereoConfig) -> Result<DisparityMap> {
    MatchContext::new(left, right, cfg.rho, cfg.sigma_floor)?.left_srp(cfg)
}

/// Right disparity map by NCC matching with search-range propagation.
pub fn estimate_right_disparity_srp(left: &GrayImage, right: &GrayImage, cfg: &StereoConfig) -> Result<DisparityMap> {
    MatchContext::new(left, right, cfg.rho, cfg.sigma_floor)?.right_srp(cfg)
}

/// Brute-force full-range matching with memoised statistics.
pub fn estimate_disparity_full(left: &GrayImage, right: &GrayImage, cfg: &StereoConfig) -> Result<DisparityMap> {
    MatchContext::new(left, right, cfg.rho, cfg.sigma_floor)?.left_full(cfg)
}

/// Brute-force full-range matching that recomputes block means and
/// deviations for every candidate.
pub fn estimate_disparity_naive(left: &GrayImage, right: &GrayImage, cfg: &StereoConfig) -> Result<DisparityMap> {
    cfg.validate()?;
    if !left.grid().same_size(right.grid()) {
        return Err(Error::SizeMismatch);
    }
    let (w, h) = (left.width(), left.height());
    let rho = cfg.rho;
    if w < 2 * rho + 1 || h < 2 * rho + 1 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            rho,
        });
    }
    let data = par::map_rows(h, |v| {
        (0..w)
            .map(|u| {
                if v < rho || v + rho >= h || u < rho || u + rho >= w {
                    return INVALID_DISPARITY;
                }
                let mut best: Option<(u16, f64)> = None;
                for d in cfg.d_min..=cfg.d_max {
                    if u < d as usize + rho {
                        continue;
                    }
                    if let Some(c) = ncc_direct(left, right, u, v, d as usize, rho, cfg.sigma_floor) {
                        if best.is_none_or(|(_, b)| c > b) {
                            best = Some((d, c));
                        }
                    }
                }
                best.map_or(INVALID_DISPARITY, |(d, _)| d)
            })
            .collect()
    });
    Grid::from_vec(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn textured(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let data = (0..w * h)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 33) % 1000) as f64 / 999.0
            })
            .collect();
        GrayImage::new(w, h, data).unwrap()
    }

    fn shifted_right(left: &GrayImage, shift: usize, fill_seed: u64) -> GrayImage {
        let (w, h) = (left.width(), left.height());
        let fill = textured(w, h, fill_seed);
        let data = (0..h)
            .flat_map(|v| {
                let fill = &fill;
                (0..w).map(move |x| {
                    if x + shift < w {
                        left.at(x + shift, v)
                    } else {
                        fill.at(x, v)
                    }
                })
            })
            .collect();
        GrayImage::new(w, h, data).unwrap()
    }

    #[test]
    fn search_range_union_of_neighbours() {
        let sr = SearchRange::propagate(&[5, 5, 6], 1, 0, 64);
        assert_eq!(sr.to_vec(), vec![4, 5, 6, 7]);
        let sr = SearchRange::propagate(&[0, 10], 1, 0, 64);
        assert_eq!(sr.to_vec(), vec![0, 1, 9, 10, 11]);
        let sr = SearchRange::propagate(&[63], 2, 0, 64);
        assert_eq!(sr.to_vec(), vec![61, 62, 63, 64]);
    }

    #[test]
    fn search_range_falls_back_to_full_when_clamped_empty() {
        let sr = SearchRange::propagate(&[0, 0, 0], 1, 5, 8);
        assert_eq!(sr.to_vec(), vec![5, 6, 7, 8]);
    }

    #[test]
    fn search_range_at_row_ends() {
        let prev = [3u16, 9, 20];
        assert_eq!(search_range(&prev, 0, 0, 0, 64).to_vec(), vec![3, 9]);
        assert_eq!(search_range(&prev, 2, 0, 0, 64).to_vec(), vec![9, 20]);
    }

    #[test]
    fn shifted_block_has_unit_correlation() {
        let left = textured(40, 20, 1);
        let right = shifted_right(&left, 5, 2);
        let ctx = MatchContext::new(&left, &right, 3, 1e-4).unwrap();
        let c = ctx.cost(20, 10, 5).unwrap().unwrap();
        assert!((c - 1.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn affine_gain_leaves_cost_at_one() {
        let left = textured(30, 15, 3);
        let data: Vec<f64> = left.grid().data().iter().map(|&x| 0.4 * x + 0.04).collect();
        let right = GrayImage::new(30, 15, data).unwrap();
        let ctx = MatchContext::new(&left, &right, 2, 1e-4).unwrap();
        let c = ctx.cost(12, 7, 0).unwrap().unwrap();
        assert!((c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flat_block_is_unmatchable() {
        let left = GrayImage::constant(20, 20, 0.5).unwrap();
        let right = textured(20, 20, 4);
        let ctx = MatchContext::new(&left, &right, 2, 1e-4).unwrap();
        assert_eq!(ctx.cost(10, 10, 2).unwrap(), None);
    }

    #[test]
    fn cost_out_of_bounds_is_an_error() {
        let left = textured(20, 20, 5);
        let ctx = MatchContext::new(&left, &left, 2, 1e-4).unwrap();
        assert!(matches!(ctx.cost(3, 10, 2), Err(Error::BlockOutOfBounds { .. })));
        assert!(matches!(ctx.cost(1, 10, 0), Err(Error::BlockOutOfBounds { .. })));
    }

    #[test]
    fn factorised_equals_direct() {
        let left = textured(32, 24, 6);
        let right = textured(32, 24, 7);
        for rho in 1..=3 {
            let sl = precompute_stats(&left, rho).unwrap();
            let sr = precompute_stats(&right, rho).unwrap();
            for (u, v, d) in [(10isize, 8isize, 2isize), (20, 12, 9), (28, 20, 0), (15, 3, 1)] {
                if v < rho as isize || v + rho as isize >= 24 {
                    continue;
                }
                let fast = ncc_cost(&left, &right, &sl, &sr, u, v, d, 1e-4).unwrap().unwrap();
                let slow = ncc_direct(&left, &right, u as usize, v as usize, d as usize, rho, 1e-4).unwrap();
                assert!((fast - slow).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identical_images_give_zero_disparity() {
        let img = textured(48, 32, 8);
        let cfg = StereoConfig {
            d_max: 16,
            ..StereoConfig::default()
        };
        let disp = estimate_disparity_srp(&img, &img, &cfg).unwrap();
        assert!(disp.data().iter().all(|&d| d == 0));
    }

    #[test]
    fn uniform_shift_is_recovered() {
        let left = textured(96, 48, 9);
        let right = shifted_right(&left, 5, 10);
        let cfg = StereoConfig {
            d_max: 16,
            ..StereoConfig::default()
        };
        let disp = estimate_disparity_srp(&left, &right, &cfg).unwrap();
        let (mut good, mut total) = (0, 0);
        for v in 3..45 {
            for u in 5 + 3..93 {
                total += 1;
                if disp[(u, v)] == 5 {
                    good += 1;
                }
            }
        }
        assert!(good as f64 >= 0.99 * total as f64, "{good}/{total}");

        let rt = estimate_right_disparity_srp(&left, &right, &cfg).unwrap();
        for v in 3..45 {
            for x in 3..96 - 5 - 3 {
                assert_eq!(rt[(x, v)], 5);
            }
        }
    }

    #[test]
    fn srp_with_wide_tau_equals_full_search() {
        let left = textured(40, 30, 11);
        let right = shifted_right(&left, 3, 12);
        let cfg = StereoConfig {
            d_max: 10,
            tau: 10,
            ..StereoConfig::default()
        };
        let srp = estimate_disparity_srp(&left, &right, &cfg).unwrap();
        let full = estimate_disparity_full(&left, &right, &cfg).unwrap();
        assert_eq!(srp, full);
        assert_eq!(full, estimate_disparity_naive(&left, &right, &cfg).unwrap());
    }

    #[test]
    fn too_small_and_mismatched_inputs_fail() {
        let a = GrayImage::constant(5, 5, 0.5).unwrap();
        let b = GrayImage::constant(6, 5, 0.5).unwrap();
        let cfg = StereoConfig::default();
        assert!(matches!(
            estimate_disparity_srp(&a, &a, &cfg),
            Err(Error::ImageTooSmall { .. })
        ));
        assert_eq!(estimate_disparity_srp(&a, &b, &cfg), Err(Error::SizeMismatch));
    }
}
