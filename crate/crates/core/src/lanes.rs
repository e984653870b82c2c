//! Lane validation: orientation-weighted horizontal gradients, energy
//! aggregation along vanishing-point tracks and lane start selection.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use core::ops::RangeInclusive;

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, RealMap};
use crate::math;
use crate::par;
use crate::preprocess::{EdgeSet, GradientField};
use crate::vanish::{ColumnFrame, RowProfile};

/// Per-row vanishing point `(V_px(v), V_py(v))`.
#[derive(Clone, Debug, PartialEq)]
pub struct VanishingField {
    pub vpx: RowProfile,
    pub vpy: RowProfile,
}

impl VanishingField {
    pub fn new(vpx: RowProfile, vpy: RowProfile) -> Result<Self> {
        if vpx.first_row != vpy.first_row || vpx.values.len() != vpy.values.len() {
            return Err(Error::SizeMismatch);
        }
        Ok(Self { vpx, vpy })
    }

    /// The same point on every row of `rows`.
    pub fn constant(vpx: f64, vpy: f64, rows: RangeInclusive<usize>) -> Self {
        let first = *rows.start();
        let n = rows.count();
        Self {
            vpx: RowProfile::new(first, vec![vpx; n]),
            vpy: RowProfile::new(first, vec![vpy; n]),
        }
    }

    #[inline]
    pub fn at(&self, v: usize) -> Option<(f64, f64)> {
        Some((self.vpx.at(v)?, self.vpy.at(v)?))
    }
}

/// Orientation weight: 1 for perfect agreement, decaying exponentially to
/// `exp(-6 / sigma_g^2)` at a difference of `pi / 6`, and 0 beyond. Angles are
/// compared modulo `pi`, so opposite directions agree.
pub fn piecewise_weight(theta_a: f64, theta_b: f64, sigma_g: f64) -> f64 {
    let mut d = math::abs(theta_a - theta_b) % PI;
    if d > FRAC_PI_2 {
        d = PI - d;
    }
    if d <= FRAC_PI_6 {
        math::exp(-(d / (sigma_g * sigma_g)) * (36.0 / PI))
    } else {
        0.0
    }
}

/// Box-accumulated weighted gradients `m0` and their horizontal derivative `m1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGxMaps {
    pub m0: RealMap,
    pub m1: RealMap,
}

/// `gx * w_g` at every edge pixel, 0 elsewhere. The edge direction (normal
/// plus a quarter turn) is compared with the ray from the pixel towards the
/// vanishing point of its row.
pub fn weighted_gx(grad: &GradientField, edges: &EdgeSet, field: &VanishingField, sigma_g: f64) -> RealMap {
    let mut out = Grid::filled(grad.width(), grad.height(), 0.0);
    for e in &edges.edges {
        let Some((px, py)) = field.at(e.v) else {
            continue;
        };
        let ray = math::atan2(py - e.v as f64, px - e.u as f64);
        out[(e.u, e.v)] = e.gx * piecewise_weight(e.theta + FRAC_PI_2, ray, sigma_g);
    }
    out
}

/// Zero-padded box sum over `(2 nu + 1)` columns by `(2 varsigma + 1)` rows.
pub fn box_sum(map: &RealMap, nu: usize, varsigma: usize) -> RealMap {
    let (w, h) = (map.width(), map.height());
    let horiz = par::map_rows(h, |v| {
        let row = map.row(v);
        (0..w)
            .map(|u| row[u.saturating_sub(nu)..(u + nu + 1).min(w)].iter().sum())
            .collect()
    });
    let vert = par::map_rows(h, |v| {
        let mut acc = vec![0.0; w];
        for r in v.saturating_sub(varsigma)..(v + varsigma + 1).min(h) {
            for (a, x) in acc.iter_mut().zip(&horiz[r * w..(r + 1) * w]) {
                *a += x;
            }
        }
        acc
    });
    Grid::from_vec(w, h, vert).expect("box sum keeps the size")
}

pub fn build_m0(
    grad: &GradientField,
    edges: &EdgeSet,
    field: &VanishingField,
    sigma_g: f64,
    nu: usize,
    varsigma: usize,
) -> RealMap {
    box_sum(&weighted_gx(grad, edges, field, sigma_g), nu, varsigma)
}

/// `m1(u, v) = sum_y k(y) (m0(u + 1, v + y) - m0(u - 1, v + y))` with
/// `k = [1, 2, 1]` and zero padding. Inside a bright stripe the rising edge
/// sits left of the falling one, so `m1` is negative between them.
pub fn build_m1(m0: &RealMap) -> RealMap {
    let (w, h) = (m0.width(), m0.height());
    let at = |u: isize, v: isize| m0.get(u, v).copied().unwrap_or(0.0);
    let data = par::map_rows(h, |v| {
        let v = v as isize;
        (0..w as isize)
            .map(|u| {
                [(-1isize, 1.0), (0, 2.0), (1, 1.0)]
                    .iter()
                    .map(|&(dy, k)| k * (at(u + 1, v + dy) - at(u - 1, v + dy)))
                    .sum()
            })
            .collect()
    });
    Grid::from_vec(w, h, data).expect("derivative keeps the size")
}

pub fn build_maps(
    grad: &GradientField,
    edges: &EdgeSet,
    field: &VanishingField,
    sigma_g: f64,
    nu: usize,
    varsigma: usize,
) -> WeightedGxMaps {
    let m0 = build_m0(grad, edges, field, sigma_g, nu, varsigma);
    let m1 = build_m1(&m0);
    WeightedGxMaps { m0, m1 }
}

/// Follows the line through the vanishing point upwards, one row at a time:
///
/// `u_v = (V_px(v+1) + (v - V_py(v+1)) u_{v+1}) / (v + 1 - V_py(v+1))`.
///
/// Returns `(u, v)` from the bottom row up to the top of `rows`. The track
/// stops early at a row whose denominator is below 0.5 in magnitude or where
/// the vanishing point is undefined.
pub fn lane_track(u_bottom: f64, field: &VanishingField, rows: RangeInclusive<usize>) -> Vec<(f64, usize)> {
    let (top, bottom) = (*rows.start(), *rows.end());
    let mut out = Vec::with_capacity(bottom.saturating_sub(top) + 1);
    if top > bottom {
        return out;
    }
    let mut u = u_bottom;
    out.push((u, bottom));
    for v in (top..bottom).rev() {
        let Some((px, py)) = field.at(v + 1) else {
            break;
        };
        let den = v as f64 + 1.0 - py;
        if math::abs(den) < 0.5 {
            break;
        }
        // Same as `(px + (v - py) u) / den`, but a track through the
        // vanishing point stays there exactly.
        u = px + (v as f64 - py) * (u - px) / den;
        out.push((u, v));
    }
    out
}

/// Energy per start column in the extended frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyHistogram {
    pub frame: ColumnFrame,
    pub values: Vec<f64>,
}

impl EnergyHistogram {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Track energy `E(v) = m1(u_v, v) + lambda_g E(v + 1)` accumulated from the
/// bottom row upwards, one entry per start column. Samples use the nearest
/// pixel; samples left or right of the image add nothing.
pub fn aggregate_energy(
    m1: &RealMap,
    field: &VanishingField,
    frame: ColumnFrame,
    lambda_g: f64,
    rows: RangeInclusive<usize>,
) -> Result<EnergyHistogram> {
    if frame.width != m1.width() {
        return Err(Error::SizeMismatch);
    }
    if *rows.end() >= m1.height() {
        return Err(invalid("row range exceeds the map"));
    }
    let values = par::map_range(frame.len(), |i| {
        let start = frame.column(i) as f64;
        lane_track(start, field, rows.clone())
            .into_iter()
            .fold(0.0, |energy, (u, v)| {
                let c = math::round(u);
                let sample = if c >= 0.0 && c < frame.width as f64 {
                    m1[(c as usize, v)]
                } else {
                    0.0
                };
                sample + lambda_g * energy
            })
    });
    Ok(EnergyHistogram { frame, values })
}

/// Default lane threshold: `-0.15 * row_count * q99`, where `q99` is the
/// nearest-rank 99th percentile of `|m1|` over `rows`.
pub fn default_tr_lpv(m1: &RealMap, rows: RangeInclusive<usize>) -> f64 {
    let n_rows = rows.clone().count();
    let mut mags: Vec<f64> = rows
        .filter(|&v| v < m1.height())
        .flat_map(|v| m1.row(v).iter().map(|x| math::abs(*x)))
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    let rank = math::ceil(0.99 * mags.len() as f64) as usize;
    -0.15 * n_rows as f64 * mags[rank.clamp(1, mags.len()) - 1]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    /// Bottom-row column of the track.
    pub start_column: i64,
    /// Index into the energy histogram.
    pub index: usize,
    pub energy: f64,
    /// `(u, v)` from the bottom row upwards.
    pub polyline: Vec<(f64, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaneSet {
    /// Sorted by ascending energy.
    pub lanes: Vec<Lane>,
}

impl LaneSet {
    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }
}

/// Strict interior local minima of the histogram below `tr_lpv`, thinned
/// greedily from the strongest so that kept starts are at least
/// `min_lane_sep` columns apart.
pub fn select_minima(hist: &EnergyHistogram, tr_lpv: f64, min_lane_sep: usize) -> Vec<usize> {
    let h = &hist.values;
    let mut cands: Vec<usize> = (1..h.len().saturating_sub(1))
        .filter(|&i| h[i] < h[i - 1] && h[i] < h[i + 1] && h[i] < tr_lpv)
        .collect();
    cands.sort_by(|&a, &b| h[a].total_cmp(&h[b]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in cands {
        if kept.iter().all(|&k| k.abs_diff(i) >= min_lane_sep) {
            kept.push(i);
        }
    }
    kept
}

pub fn select_lanes(
    hist: &EnergyHistogram,
    tr_lpv: f64,
    min_lane_sep: usize,
    field: &VanishingField,
    rows: RangeInclusive<usize>,
) -> LaneSet {
    let lanes = select_minima(hist, tr_lpv, min_lane_sep)
        .into_iter()
        .map(|index| {
            let start_column = hist.frame.column(index);
            Lane {
                start_column,
                index,
                energy: hist.values[index],
                polyline: lane_track(start_column as f64, field, rows.clone()),
            }
        })
        .collect();
    LaneSet { lanes }
}
