use crate::error::{Error, Result};
use crate::grid::{GrayImage, Grid};
use crate::math;

use super::integral::IntegralImage;

/// Memoised per-pixel block mean and standard deviation.
///
/// Pixels whose block leaves the image get the statistics of the clipped
/// window; the matchers never use them since such pixels are invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStats {
    pub rho: usize,
    pub mean: Grid<f64>,
    pub sigma: Grid<f64>,
}

impl BlockStats {
    #[inline]
    pub fn mean_at(&self, u: usize, v: usize) -> f64 {
        self.mean[(u, v)]
    }

    #[inline]
    pub fn sigma_at(&self, u: usize, v: usize) -> f64 {
        self.sigma[(u, v)]
    }
}

/// Computes block means and deviations from integral images of `I` and `I^2`,
/// using `sigma = sqrt(sum(I^2)/n - mu^2)`. Radicands within rounding error of
/// zero are clamped to zero.
pub fn precompute_stats(img: &GrayImage, rho: usize) -> Result<BlockStats> {
    let (w, h) = (img.width(), img.height());
    let side = 2 * rho + 1;
    if w < side || h < side {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            rho,
        });
    }
    let values = img.grid().data();
    let sum = IntegralImage::from_values(w, h, values, |x| x)?;
    let sum_sq = IntegralImage::from_values(w, h, values, |x| x * x)?;

    let mut mean = Grid::filled(w, h, 0.0);
    let mut sigma = Grid::filled(w, h, 0.0);
    for v in 0..h {
        let v0 = v.saturating_sub(rho);
        let v1 = (v + rho).min(h - 1);
        for u in 0..w {
            let u0 = u.saturating_sub(rho);
            let u1 = (u + rho).min(w - 1);
            let n = ((u1 - u0 + 1) * (v1 - v0 + 1)) as f64;
            let mu = sum.rect_sum(u0, v0, u1, v1) / n;
            let mean_sq = sum_sq.rect_sum(u0, v0, u1, v1) / n;
            let var = mean_sq - mu * mu;
            mean[(u, v)] = mu;
            // Variances at the level of the cancellation error are flat blocks.
            sigma[(u, v)] = if var > 64.0 * f64::EPSILON * mean_sq {
                math::sqrt(var)
            } else {
                0.0
            };
        }
    }
    Ok(BlockStats { rho, mean, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn direct_stats(img: &GrayImage, u: usize, v: usize, rho: usize) -> (f64, f64) {
        let n = ((2 * rho + 1) * (2 * rho + 1)) as f64;
        let mut s = 0.0;
        for j in v - rho..=v + rho {
            for i in u - rho..=u + rho {
                s += img.at(i, j);
            }
        }
        let mu = s / n;
        let mut ss = 0.0;
        for j in v - rho..=v + rho {
            for i in u - rho..=u + rho {
                ss += (img.at(i, j) - mu).powi(2);
            }
        }
        (mu, (ss / n).sqrt())
    }

    #[test]
    fn constant_image_has_zero_deviation_everywhere() {
        let img = GrayImage::constant(9, 7, 0.37).unwrap();
        let stats = precompute_stats(&img, 2).unwrap();
        for v in 0..7 {
            for u in 0..9 {
                assert!((stats.mean_at(u, v) - 0.37).abs() < 1e-12);
                assert_eq!(stats.sigma_at(u, v), 0.0);
            }
        }
    }

    #[test]
    fn horizontal_ramp() {
        // I(u,v) = u/255: a 3x3 block holds columns u-1, u, u+1 three times,
        // so mu = u/255 and sigma = sqrt(2/3)/255.
        let (w, h) = (12, 6);
        let data: Vec<f64> = (0..w * h).map(|i| (i % w) as f64 / 255.0).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        let stats = precompute_stats(&img, 1).unwrap();
        let expected_sigma = (2.0f64 / 3.0).sqrt() / 255.0;
        for v in 1..h - 1 {
            for u in 1..w - 1 {
                assert!((stats.mean_at(u, v) - u as f64 / 255.0).abs() < 1e-12);
                assert!((stats.sigma_at(u, v) - expected_sigma).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_direct_evaluation() {
        let (w, h) = (20, 15);
        let data: Vec<f64> = (0..w * h).map(|i| ((i * 7919) % 1009) as f64 / 1008.0).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        for rho in 1..=3 {
            let stats = precompute_stats(&img, rho).unwrap();
            for v in rho..h - rho {
                for u in rho..w - rho {
                    let (mu, sigma) = direct_stats(&img, u, v, rho);
                    assert!((stats.mean_at(u, v) - mu).abs() < 1e-9);
                    assert!((stats.sigma_at(u, v) - sigma).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn block_larger_than_image_is_rejected() {
        let img = GrayImage::constant(4, 10, 0.1).unwrap();
        assert!(matches!(precompute_stats(&img, 2), Err(Error::ImageTooSmall { .. })));
    }
}
