//! Direct, deliberately naive evaluations of the quantities the core crate
//! computes with memoisation, sliding windows or dynamic programming.
//!
//! Budgets: block sums and NCC cost `O(rho^2)` per call, the bilateral
//! filter `O(W H rho^2)`, band sums `O(rows * chi * votes)`, and path
//! enumeration at most `MAX_PATHS` complete paths.

use stereolane_core::dp::Smoothness;
use stereolane_core::{Error, GrayImage, Grid, Result};

/// Upper bound on the number of paths the enumerators will visit.
pub const MAX_PATHS: u128 = 1_000_000;

/// Sum of the `(2 rho + 1)^2` block centred on `(u, v)`.
pub fn oracle_block_sum(img: &GrayImage, u: usize, v: usize, rho: usize) -> f64 {
    let mut s = 0.0;
    for j in v - rho..=v + rho {
        for i in u - rho..=u + rho {
            s += img.at(i, j);
        }
    }
    s
}

/// Zero-mean normalised cross-correlation between the left block at `(u, v)`
/// and the right block at `(u - d, v)`, from its textbook definition.
/// `None` when either block is flat.
pub fn oracle_ncc_direct(
    left: &GrayImage,
    right: &GrayImage,
    u: usize,
    v: usize,
    d: usize,
    rho: usize,
    sigma_floor: f64,
) -> Option<f64> {
    let n = ((2 * rho + 1) * (2 * rho + 1)) as f64;
    let mean = |img: &GrayImage, c: usize| oracle_block_sum(img, c, v, rho) / n;
    let (ml, mr) = (mean(left, u), mean(right, u - d));
    let (mut num, mut vl, mut vr) = (0.0, 0.0, 0.0);
    for j in v - rho..=v + rho {
        for k in 0..=2 * rho {
            let a = left.at(u - rho + k, j) - ml;
            let b = right.at(u - d - rho + k, j) - mr;
            num += a * b;
            vl += a * a;
            vr += b * b;
        }
    }
    let (sl, sr) = ((vl / n).sqrt(), (vr / n).sqrt());
    if sl < sigma_floor || sr < sigma_floor {
        return None;
    }
    Some(num / (n * sl * sr))
}

fn reflect(i: isize, n: usize) -> usize {
    // Reflection without repeating the border pixel: -1 -> 1, n -> n - 2.
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Bilateral filter evaluated pixel by pixel with Gaussian weights
/// recomputed for every neighbour.
pub fn oracle_bilateral(img: &GrayImage, sigma_s: f64, sigma_r: f64, rho: usize) -> Grid<f64> {
    let (w, h) = (img.width(), img.height());
    let r = rho as isize;
    Grid::from_fn(w, h, |u, v| {
        let c = img.at(u, v);
        let (mut num, mut den) = (0.0, 0.0);
        for j in -r..=r {
            for i in -r..=r {
                let q = img.at(reflect(u as isize + i, w), reflect(v as isize + j, h));
                let ws = (-((i * i + j * j) as f64) / (sigma_s * sigma_s)).exp();
                let wr = (-(c - q) * (c - q) / (sigma_r * sigma_r)).exp();
                num += ws * wr * q;
                den += ws * wr;
            }
        }
        num / den
    })
}

/// Vote counts per accumulator cell by scanning every vote for every cell:
/// `count(i, v) = #{votes at column index i with |v_vote - v| <= chi}`,
/// rows restricted to `[first, last]`. Votes are `(column index, row)`.
pub fn oracle_band_sum(votes: &[(usize, usize)], columns: usize, chi: usize, first: usize, last: usize) -> Grid<u32> {
    Grid::from_fn(columns, last - first + 1, |i, r| {
        let v = first + r;
        votes
            .iter()
            .filter(|&&(c, vv)| c == i && vv >= first && vv <= last && vv.abs_diff(v) <= chi)
            .count() as u32
    })
}

/// Best path found by exhaustive enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedPath {
    pub energy: f64,
    /// Position (row or column) per stage, in stage order.
    pub positions: Vec<usize>,
}

fn guard(choices: u128, starts: usize, stages: usize) -> Result<()> {
    let total = (starts as u128).saturating_mul(choices.saturating_pow(stages.saturating_sub(1) as u32));
    if total > MAX_PATHS {
        Err(Error::TooLarge { paths: total })
    } else {
        Ok(())
    }
}

/// Enumerates all v-disparity paths over `counts` (indexed `(d, v)`, bin 0
/// ignored). A path picks row `v` at disparity `d` and `v + step` at `d + 1`
/// with `step` in `[0, max_step]`. Energy is
/// `sum_d -cost(d, v_d) + sum_d penalty(step_d)`, penalty `+lambda * step`
/// (or `-lambda * step` for [`Smoothness::Signed`]).
///
/// Among equal energies the path whose rows, read from `d = 1` upwards, are
/// lexicographically smallest wins.
pub fn oracle_vpath_enumerate(
    counts: &Grid<u32>,
    lambda: f64,
    max_step: usize,
    smoothness: Smoothness,
) -> Result<EnumeratedPath> {
    let (bins, rows) = (counts.width(), counts.height());
    if bins < 2 || rows == 0 {
        return Err(Error::InvalidParameter(
            "need at least one disparity bin besides 0".into(),
        ));
    }
    let d_max = bins - 1;
    guard(max_step as u128 + 1, rows, d_max)?;
    let pen = |s: usize| match smoothness {
        Smoothness::Penalty => lambda * s as f64,
        Smoothness::Signed => -lambda * s as f64,
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    // path[k] is the row at disparity k + 1.
    let mut path = vec![0usize; d_max];
    fn walk(
        k: usize,
        energy: f64,
        path: &mut Vec<usize>,
        counts: &Grid<u32>,
        max_step: usize,
        pen: &dyn Fn(usize) -> f64,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let d_max = path.len();
        if k == d_max {
            let better = match best {
                None => true,
                Some((e, p)) => energy < *e || (energy == *e && path < p),
            };
            if better {
                *best = Some((energy, path.clone()));
            }
            return;
        }
        let options: Vec<(usize, f64)> = if k == 0 {
            (0..counts.height()).map(|v| (v, 0.0)).collect()
        } else {
            let prev = path[k - 1];
            (0..=max_step)
                .filter(|s| prev + s < counts.height())
                .map(|s| (prev + s, pen(s)))
                .collect()
        };
        for (v, p) in options {
            path[k] = v;
            let e = energy - f64::from(counts[(k + 1, v)]) + p;
            walk(k + 1, e, path, counts, max_step, pen, best);
        }
    }
    walk(0, 0.0, &mut path, counts, max_step, &pen, &mut best);
    let (energy, rows_up) = best.expect("at least one path exists");
    // Stage order: d_max first.
    Ok(EnumeratedPath {
        energy,
        positions: rows_up.into_iter().rev().collect(),
    })
}

/// Enumerates all column paths through `values` (`m_x`, column-major
/// `(column, row)` indexing) from the bottom row to the top. A path picks
/// column `u` at row `v` and `u + shift` at row `v + 1`, `|shift| <=
/// max_shift`. Energy is `sum_v m(u_v, v) + sum penalty(shift)` with
/// penalty `lambda |shift|` (or `lambda * shift` for [`Smoothness::Signed`]).
///
/// Ties go to the path whose top column is smallest, then whose shifts read
/// from the top down are smallest in the order `0, -1, 1, -2, 2, ...`.
pub fn oracle_upath_enumerate(
    values: &Grid<f64>,
    lambda: f64,
    max_shift: usize,
    smoothness: Smoothness,
) -> Result<EnumeratedPath> {
    let (cols, rows) = (values.width(), values.height());
    if cols == 0 || rows == 0 {
        return Err(Error::InvalidParameter("empty accumulator".into()));
    }
    guard(2 * max_shift as u128 + 1, cols, rows)?;
    let pen = |s: isize| match smoothness {
        Smoothness::Penalty => lambda * s.unsigned_abs() as f64,
        Smoothness::Signed => lambda * s as f64,
    };
    let rank = |s: isize| {
        if s < 0 {
            2 * s.unsigned_abs() - 1
        } else {
            2 * s as usize
        }
    };
    // Paths are built from the top row down; key = [top column, rank of
    // each shift going down].
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut cols_down = vec![0usize; rows];
    let mut key = vec![0usize; rows];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        r: usize,
        energy: f64,
        cols_down: &mut Vec<usize>,
        key: &mut Vec<usize>,
        values: &Grid<f64>,
        max_shift: usize,
        pen: &dyn Fn(isize) -> f64,
        rank: &dyn Fn(isize) -> usize,
        best: &mut Option<(f64, Vec<usize>, Vec<usize>)>,
    ) {
        let rows = cols_down.len();
        if r == rows {
            let better = match best {
                None => true,
                Some((e, k, _)) => energy < *e || (energy == *e && key < k),
            };
            if better {
                *best = Some((energy, key.clone(), cols_down.clone()));
            }
            return;
        }
        let cols = values.width();
        if r == 0 {
            for u in 0..cols {
                cols_down[0] = u;
                key[0] = u;
                walk(
                    1,
                    energy + values[(u, 0)],
                    cols_down,
                    key,
                    values,
                    max_shift,
                    pen,
                    rank,
                    best,
                );
            }
            return;
        }
        // Row index r counts from the top; the shift leads from the column
        // on the upper row to the column on the row below it.
        let upper = cols_down[r - 1] as isize;
        let m = max_shift as isize;
        for s in -m..=m {
            let u = upper + s;
            if u < 0 || u as usize >= cols {
                continue;
            }
            cols_down[r] = u as usize;
            key[r] = rank(s);
            let e = energy + values[(u as usize, r)] + pen(s);
            walk(r + 1, e, cols_down, key, values, max_shift, pen, rank, best);
        }
    }
    walk(
        0,
        0.0,
        &mut cols_down,
        &mut key,
        values,
        max_shift,
        &pen,
        &rank,
        &mut best,
    );
    let (energy, _, down) = best.expect("at least one path exists");
    Ok(EnumeratedPath {
        energy,
        positions: down.into_iter().rev().collect(),
    })
}
