//! Row-major rasters.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Disparity value used for pixels without a trusted match.
pub const INVALID_DISPARITY: u16 = 0;

/// A `width x height` row-major raster addressed as `(u, v)` = (column, row).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Real-valued 2D map.
pub type RealMap = Grid<f64>;

/// Integer disparity per pixel; [`INVALID_DISPARITY`] marks rejected pixels.
pub type DisparityMap = Grid<u16>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
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
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[T] {
        &self.data[v * self.width..(v + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, v: usize) -> &mut [T] {
        &mut self.data[v * self.width..(v + 1) * self.width]
    }

    /// Checked access with signed coordinates.
    #[inline]
    pub fn get(&self, u: isize, v: isize) -> Option<&T> {
        if u < 0 || v < 0 || u as usize >= self.width || v as usize >= self.height {
            None
        } else {
            Some(&self.data[v as usize * self.width + u as usize])
        }
    }

    pub fn same_size<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (u, v): (usize, usize)) -> &T {
        debug_assert!(u < self.width && v < self.height);
        &self.data[v * self.width + u]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (u, v): (usize, usize)) -> &mut T {
        debug_assert!(u < self.width && v < self.height);
        &mut self.data[v * self.width + u]
    }
}

/// Grayscale image with intensities normalised to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage(Grid<f64>);

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::IntensityOutOfRange { index, value });
        }
        Grid::from_vec(width, height, data).map(Self)
    }

    /// Wraps a grid, clamping every value into `[0, 1]` (NaN becomes 0).
    pub fn from_grid_clamped(grid: Grid<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyImage);
        }
        Ok(Self(grid.map(|&x| if x >= 0.0 { x.min(1.0) } else { 0.0 })))
    }

    /// 8-bit intensities divided by 255.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        let data = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
        Grid::from_vec(width, height, data).map(Self)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Quantises back to 8 bits with rounding.
    pub fn to_u8(&self) -> Vec<u8> {
        self.0
            .data()
            .iter()
            .map(|&x| crate::math::round(x * 255.0) as u8)
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.0[(u, v)]
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[f64] {
        self.0.row(v)
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }
}
