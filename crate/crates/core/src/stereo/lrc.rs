use crate::error::{Error, Result};
use crate::grid::{DisparityMap, Grid, INVALID_DISPARITY};

/// Keeps `lf(u, v)` only where the right map agrees at `u - lf(u, v)` to
/// within `tr_lrc`; everything else becomes invalid.
pub fn lrc_check(lf: &DisparityMap, rt: &DisparityMap, tr_lrc: u16) -> Result<DisparityMap> {
    if !lf.same_size(rt) {
        return Err(Error::SizeMismatch);
    }
    let (w, h) = (lf.width(), lf.height());
    let mut out = Grid::filled(w, h, INVALID_DISPARITY);
    for v in 0..h {
        let (lrow, rrow) = (lf.row(v), rt.row(v));
        for (u, &d) in lrow.iter().enumerate() {
            let Some(x) = u.checked_sub(d as usize) else {
                continue;
            };
            if d.abs_diff(rrow[x]) <= tr_lrc {
                out[(u, v)] = d;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistent_maps_pass_through() {
        // Constant disparity 2 in both views is self-consistent.
        let lf = Grid::filled(12, 4, 2u16);
        let rt = Grid::filled(12, 4, 2u16);
        let out = lrc_check(&lf, &rt, 3).unwrap();
        for v in 0..4 {
            for u in 2..12 {
                assert_eq!(out[(u, v)], 2);
            }
            // u - d < 0 at the left border.
            assert_eq!(out[(0, v)], 0);
            assert_eq!(out[(1, v)], 0);
        }
    }

    #[test]
    fn disagreement_beyond_threshold_is_rejected() {
        let mut lf = Grid::filled(16, 8, 0u16);
        let mut rt = Grid::filled(16, 8, 0u16);
        lf[(10, 5)] = 4;
        rt[(6, 5)] = 8;
        let out = lrc_check(&lf, &rt, 3).unwrap();
        assert_eq!(out[(10, 5)], 0);
        rt[(6, 5)] = 7;
        assert_eq!(lrc_check(&lf, &rt, 3).unwrap()[(10, 5)], 4);
    }

    #[test]
    fn reprojection_outside_the_image_is_rejected() {
        let mut lf = Grid::filled(16, 8, 0u16);
        let rt = Grid::filled(16, 8, 7u16);
        lf[(2, 5)] = 7;
        assert_eq!(lrc_check(&lf, &rt, 3).unwrap()[(2, 5)], 0);
    }

    #[test]
    fn mismatched_sizes_fail() {
        let a = Grid::filled(4, 4, 0u16);
        let b = Grid::filled(4, 5, 0u16);
        assert_eq!(lrc_check(&a, &b, 3), Err(Error::SizeMismatch));
    }
}
