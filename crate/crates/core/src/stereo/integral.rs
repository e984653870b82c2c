use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{GrayImage, Grid};

/// Summed-area table: `at(u, v)` is the sum of every input value at
/// `(i, j)` with `i <= u` and `j <= v`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl IntegralImage {
    /// Builds the table with the four-reference recurrence
    /// `In(u,v) = In(u,v-1) + In(u-1,v) - In(u-1,v-1) + I(u,v)`.
    pub fn from_grid(grid: &Grid<f64>) -> Result<Self> {
        Self::from_values(grid.width(), grid.height(), grid.data(), |x| x)
    }

    /// Same as [`from_grid`](Self::from_grid) over `f(x)` of every value.
    pub fn from_values(width: usize, height: usize, values: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                width,
                height,
                len: values.len(),
            });
        }
        let mut data = vec![0.0; width * height];
        let at = |u: usize, v: usize| v * width + u;
        data[0] = f(values[0]);
        for u in 1..width {
            data[at(u, 0)] = data[at(u - 1, 0)] + f(values[at(u, 0)]);
        }
        for v in 1..height {
            data[at(0, v)] = data[at(0, v - 1)] + f(values[at(0, v)]);
        }
        for v in 1..height {
            for u in 1..width {
                data[at(u, v)] = data[at(u, v - 1)] + data[at(u - 1, v)] - data[at(u - 1, v - 1)] + f(values[at(u, v)]);
            }
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    /// `In(u, v)` with zero for negative coordinates.
    #[inline]
    fn at_or_zero(&self, u: isize, v: isize) -> f64 {
        if u < 0 || v < 0 {
            0.0
        } else {
            self.data[v as usize * self.width + u as usize]
        }
    }

    /// Sum over the inclusive rectangle `[u0, u1] x [v0, v1]`, which must lie
    /// inside the table.
    #[inline]
    pub fn rect_sum(&self, u0: usize, v0: usize, u1: usize, v1: usize) -> f64 {
        let (u0, v0, u1, v1) = (u0 as isize, v0 as isize, u1 as isize, v1 as isize);
        self.at_or_zero(u1, v1) + self.at_or_zero(u0 - 1, v0 - 1)
            - self.at_or_zero(u0 - 1, v1)
            - self.at_or_zero(u1, v0 - 1)
    }

    /// Sum over the `(2 rho + 1)`-square block centred at `(u, v)`.
    pub fn block_sum(&self, u: isize, v: isize, rho: usize) -> Result<f64> {
        let r = rho as isize;
        if u - r < 0 || v - r < 0 || u + r >= self.width as isize || v + r >= self.height as isize {
            return Err(Error::BlockOutOfBounds { u, v, rho });
        }
        let (u, v) = (u as usize, v as usize);
        Ok(self.rect_sum(u - rho, v - rho, u + rho, v + rho))
    }
}

/// Integral image of a grayscale image.
pub fn build_integral(img: &GrayImage) -> Result<IntegralImage> {
    IntegralImage::from_grid(img.grid())
}

/// Block sum through four integral-image references.
pub fn block_sum(integ: &IntegralImage, u: isize, v: isize, rho: usize) -> Result<f64> {
    integ.block_sum(u, v, rho)
}
