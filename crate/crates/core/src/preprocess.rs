//! Road masking, bilateral smoothing and Sobel edges on the road area.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::grid::{DisparityMap, GrayImage, Grid, INVALID_DISPARITY};
use crate::math::{self, mirror};
use crate::par;
use crate::road::RoadProfile;

/// Pixels whose disparity lies within `varpi` of the road profile.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadMask {
    pub mask: Grid<bool>,
    pub first_row: usize,
    pub last_row: usize,
}

impl RoadMask {
    /// A mask that accepts every pixel.
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            mask: Grid::filled(width, height, true),
            first_row: 0,
            last_row: height.saturating_sub(1),
        }
    }

    #[inline]
    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.mask[(u, v)]
    }

    pub fn count(&self) -> usize {
        self.mask.data().iter().filter(|&&m| m).count()
    }
}

/// Marks `(u, v)` as road when `horizon <= v <= v_max` and the disparity is
/// valid with `|d(u, v) - f(v)| <= varpi`.
pub fn road_mask(disp: &DisparityMap, profile: &RoadProfile, varpi: f64) -> RoadMask {
    let first_row = profile.horizon_row();
    let last_row = profile.v_max.min(disp.height().saturating_sub(1));
    let mask = Grid::from_fn(disp.width(), disp.height(), |u, v| {
        let d = disp[(u, v)];
        v >= first_row
            && v <= last_row
            && d != INVALID_DISPARITY
            && math::abs(f64::from(d) - profile.disparity(v as f64)) <= varpi
    });
    RoadMask {
        mask,
        first_row,
        last_row,
    }
}

/// Edge-preserving smoothing over a `(2 rho + 1)` square window with
/// mirrored borders:
///
/// `out(p) = sum_q w_s(p, q) w_r(p, q) I(q) / sum_q w_s(p, q) w_r(p, q)`
///
/// with `w_s = exp(-|p - q|^2 / sigma_s^2)` and
/// `w_r = exp(-(I(p) - I(q))^2 / sigma_r^2)`.
pub fn bilateral_filter(img: &GrayImage, sigma_s: f64, sigma_r: f64, rho: usize) -> Result<GrayImage> {
    if !(sigma_s > 0.0 && sigma_r > 0.0) {
        return Err(invalid("bilateral sigmas must be positive"));
    }
    let (w, h) = (img.width(), img.height());
    let r = rho as isize;
    let side = 2 * rho + 1;
    // Spatial weights depend only on the offset.
    let spatial: Vec<f64> = (0..side * side)
        .map(|k| {
            let dx = (k % side) as f64 - rho as f64;
            let dy = (k / side) as f64 - rho as f64;
            math::exp(-(dx * dx + dy * dy) / (sigma_s * sigma_s))
        })
        .collect();
    let inv_r2 = 1.0 / (sigma_r * sigma_r);
    let data = par::map_rows(h, |v| {
        (0..w)
            .map(|u| {
                let centre = img.at(u, v);
                let (mut num, mut den) = (0.0, 0.0);
                for dy in -r..=r {
                    let row = img.row(mirror(v as isize + dy, h));
                    let base = ((dy + r) as usize) * side;
                    for dx in -r..=r {
                        let q = row[mirror(u as isize + dx, w)];
                        let diff = centre - q;
                        let wt = spatial[base + (dx + r) as usize] * math::exp(-diff * diff * inv_r2);
                        num += wt * diff;
                        den += wt;
                    }
                }
                // Weighted mean of differences: exact on flat patches.
                centre - num / den
            })
            .collect()
    });
    GrayImage::from_grid_clamped(Grid::from_vec(w, h, data)?)
}

/// Sobel derivatives and edge-normal orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    pub gx: Grid<f64>,
    pub gy: Grid<f64>,
    pub magnitude: Grid<f64>,
    /// `atan2(gy, gx)` in `(-pi, pi]`.
    pub theta: Grid<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.gx.width()
    }

    pub fn height(&self) -> usize {
        self.gx.height()
    }
}

/// `atan2` folded into `(-pi, pi]`.
pub(crate) fn angle(gy: f64, gx: f64) -> f64 {
    let t = math::atan2(gy, gx);
    if t <= -core::f64::consts::PI {
        core::f64::consts::PI
    } else {
        t
    }
}

/// Sobel gradients with mirrored borders. `gx` is positive where intensity
/// increases to the right, `gy` where it increases downwards.
pub fn sobel_gradients(img: &GrayImage) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            rho: 1,
        });
    }
    let pixels = par::map_rows(h, |v| {
        let up = img.row(mirror(v as isize - 1, h));
        let mid = img.row(v);
        let down = img.row(mirror(v as isize + 1, h));
        (0..w)
            .map(|u| {
                let l = mirror(u as isize - 1, w);
                let r = mirror(u as isize + 1, w);
                let gx = (up[r] - up[l]) + 2.0 * (mid[r] - mid[l]) + (down[r] - down[l]);
                let gy = (down[l] - up[l]) + 2.0 * (down[u] - up[u]) + (down[r] - up[r]);
                (gx, gy)
            })
            .collect()
    });
    let gx = Grid::from_vec(w, h, pixels.iter().map(|p| p.0).collect())?;
    let gy = Grid::from_vec(w, h, pixels.iter().map(|p| p.1).collect())?;
    let magnitude = Grid::from_vec(w, h, pixels.iter().map(|p| math::sqrt(p.0 * p.0 + p.1 * p.1)).collect())?;
    let theta = Grid::from_vec(w, h, pixels.iter().map(|p| angle(p.1, p.0)).collect())?;
    Ok(GradientField {
        gx,
        gy,
        magnitude,
        theta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgePixel {
    pub u: usize,
    pub v: usize,
    pub gx: f64,
    pub gy: f64,
    pub theta: f64,
}

/// Edge pixels in row-major order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeSet {
    pub edges: Vec<EdgePixel>,
}

impl EdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Rasterises the set as a boolean grid.
    pub fn to_mask(&self, width: usize, height: usize) -> Grid<bool> {
        let mut g = Grid::filled(width, height, false);
        for e in &self.edges {
            g[(e.u, e.v)] = true;
        }
        g
    }
}

/// Pixels with `magnitude >= threshold` inside the road mask. The threshold
/// is in normalised intensity units (a 0-255 threshold divided by 255).
pub fn edge_map(grad: &GradientField, threshold: f64, mask: &RoadMask) -> Result<EdgeSet> {
    if !grad.magnitude.same_size(&mask.mask) {
        return Err(Error::SizeMismatch);
    }
    let mut edges = Vec::new();
    for v in 0..grad.height() {
        for u in 0..grad.width() {
            if mask.contains(u, v) && grad.magnitude[(u, v)] >= threshold {
                edges.push(EdgePixel {
                    u,
                    v,
                    gx: grad.gx[(u, v)],
                    gy: grad.gy[(u, v)],
                    theta: grad.theta[(u, v)],
                });
            }
        }
    }
    Ok(EdgeSet { edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_image(w: usize, h: usize, vertical: bool, lo: f64, hi: f64) -> GrayImage {
        let g = Grid::from_fn(w, h, |u, v| {
            let k = if vertical { u } else { v };
            if k < w.min(h) / 2 {
                lo
            } else {
                hi
            }
        });
        GrayImage::from_grid_clamped(g).unwrap()
    }

    #[test]
    fn constant_image_is_a_fixed_point() {
        let img = GrayImage::constant(9, 7, 0.37).unwrap();
        assert_eq!(bilateral_filter(&img, 300.0, 0.3, 5).unwrap(), img);
        let one = GrayImage::constant(1, 1, 0.8).unwrap();
        assert_eq!(bilateral_filter(&one, 300.0, 0.3, 5).unwrap(), one);
        let g = sobel_gradients(&img).unwrap();
        assert!(g.gx.data().iter().chain(g.gy.data()).all(|&x| x == 0.0));
    }

    #[test]
    fn sobel_step_responses() {
        let h = 0.5;
        let img = step_image(10, 10, true, 0.2, 0.2 + h);
        let g = sobel_gradients(&img).unwrap();
        for v in 0..10 {
            assert!((g.gx[(4, v)] - 4.0 * h).abs() < 1e-12);
            assert!((g.gx[(5, v)] - 4.0 * h).abs() < 1e-12);
            assert_eq!(g.gx[(2, v)], 0.0);
            assert!(g.gy.row(v).iter().all(|&x| x == 0.0));
        }
        let img = step_image(10, 10, false, 0.2, 0.2 + h);
        let g = sobel_gradients(&img).unwrap();
        assert!((g.gy[(3, 4)] - 4.0 * h).abs() < 1e-12);
        assert!(g.gx.data().iter().all(|&x| x == 0.0));
        assert!((g.theta[(3, 4)] - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn theta_range_is_half_open() {
        assert_eq!(angle(-0.0, -1.0), core::f64::consts::PI);
        assert_eq!(angle(0.0, -1.0), core::f64::consts::PI);
    }

    #[test]
    fn edges_respect_mask_and_threshold() {
        let img = step_image(10, 10, true, 0.2, 0.7);
        let g = sobel_gradients(&img).unwrap();
        let full = RoadMask::full(10, 10);
        let e = edge_map(&g, 100.0 / 255.0, &full).unwrap();
        assert_eq!(e.len(), 20);
        let empty = RoadMask {
            mask: Grid::filled(10, 10, false),
            first_row: 0,
            last_row: 9,
        };
        assert!(edge_map(&g, 0.0, &empty).unwrap().is_empty());
    }

    #[test]
    fn road_mask_gates_rows_and_residuals() {
        let profile = RoadProfile::new([-50.0, 0.5, 0.0], 199).unwrap();
        let mut disp = Grid::filled(3, 200, 0u16);
        disp[(0, 150)] = 25;
        disp[(1, 150)] = 29;
        disp[(2, 50)] = 1;
        let m = road_mask(&disp, &profile, 3.0);
        assert!(m.contains(0, 150));
        assert!(!m.contains(1, 150));
        assert!(!m.contains(2, 50));
        assert_eq!(m.first_row, 100);
        assert_eq!(m.count(), 1);
    }
}
