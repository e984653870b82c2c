use std::f64::consts::{FRAC_PI_6, PI};

use proptest::prelude::*;
use stereolane_core::lanes::{
    box_sum, build_m1, lane_track, piecewise_weight, select_minima, EnergyHistogram, VanishingField,
};
use stereolane_core::vanish::{ColumnFrame, RowProfile};
use stereolane_core::Grid;

fn map(w: usize, h: usize) -> impl Strategy<Value = Grid<f64>> {
    prop::collection::vec(-1.0f64..1.0, w * h).prop_map(move |d| Grid::from_vec(w, h, d).unwrap())
}

fn combine(a: &Grid<f64>, b: &Grid<f64>, x: f64, y: f64) -> Grid<f64> {
    Grid::from_vec(
        a.width(),
        a.height(),
        a.data().iter().zip(b.data()).map(|(p, q)| x * p + y * q).collect(),
    )
    .unwrap()
}

fn close(a: &Grid<f64>, b: &Grid<f64>, tol: f64) -> bool {
    a.data().iter().zip(b.data()).all(|(p, q)| (p - q).abs() <= tol)
}

proptest! {
    #[test]
    fn weight_is_bounded_symmetric_and_periodic(a in -7.0f64..7.0, b in -7.0f64..7.0, sg in 0.5f64..6.0) {
        let w = piecewise_weight(a, b, sg);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w - piecewise_weight(b, a, sg)).abs() < 1e-12);
        prop_assert!((w - piecewise_weight(a + PI, b, sg)).abs() < 1e-9);
    }

    #[test]
    fn weight_vanishes_past_thirty_degrees(a in -3.0f64..3.0, extra in 1e-6f64..(PI / 3.0 - 2e-6)) {
        prop_assert_eq!(piecewise_weight(a + FRAC_PI_6 + extra, a, 3.5), 0.0);
    }

    #[test]
    fn box_sum_and_derivative_are_linear(
        a in map(12, 9),
        b in map(12, 9),
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        nu in 0usize..4,
        vs in 0usize..3,
    ) {
        let lhs = box_sum(&combine(&a, &b, x, y), nu, vs);
        let rhs = combine(&box_sum(&a, nu, vs), &box_sum(&b, nu, vs), x, y);
        prop_assert!(close(&lhs, &rhs, 1e-9));
        let lhs = build_m1(&combine(&a, &b, x, y));
        let rhs = combine(&build_m1(&a), &build_m1(&b), x, y);
        prop_assert!(close(&lhs, &rhs, 1e-9));
    }

    #[test]
    fn box_sum_matches_a_direct_window_sum(a in map(10, 8), nu in 0usize..4, vs in 0usize..3) {
        let out = box_sum(&a, nu, vs);
        for v in 0..8usize {
            for u in 0..10usize {
                let mut s = 0.0;
                for j in v.saturating_sub(vs)..=(v + vs).min(7) {
                    for i in u.saturating_sub(nu)..=(u + nu).min(9) {
                        s += a[(i, j)];
                    }
                }
                prop_assert!((out[(u, v)] - s).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_vanishing_point_tracks_are_straight(
        start in -200.0f64..800.0,
        px in 100.0f64..500.0,
        py in 0.0f64..100.0,
    ) {
        let rows = 150..=359usize;
        let field = VanishingField::constant(px, py, rows.clone());
        let track = lane_track(start, &field, rows);
        prop_assert_eq!(track.len(), 210);
        let (u0, v0) = (track[0].0, track[0].1 as f64);
        for &(u, v) in &track {
            // Cross product of (p - start) and (vp - start), scaled by the ray length.
            let cross = (u - u0) * (py - v0) - (v as f64 - v0) * (px - u0);
            let norm = ((px - u0).powi(2) + (py - v0).powi(2)).sqrt();
            prop_assert!((cross / norm).abs() < 1e-6, "off the line by {}", cross / norm);
        }
    }

    #[test]
    fn a_track_starting_under_the_vanishing_point_stays_there(px in 0.0f64..640.0, py in 0.0f64..100.0) {
        let field = VanishingField::constant(px, py, 120..=359);
        for (u, _) in lane_track(px, &field, 120..=359) {
            prop_assert_eq!(u, px);
        }
    }

    #[test]
    fn selected_minima_are_sound(
        values in prop::collection::vec(-10.0f64..10.0, 3..80),
        tr in -8.0f64..4.0,
        sep in 1usize..10,
    ) {
        let n = values.len();
        let hist = EnergyHistogram { frame: ColumnFrame { width: n, offset: 0 }, values: values.clone() };
        let kept = select_minima(&hist, tr, sep);
        let is_min = |i: usize| i > 0 && i + 1 < n && values[i] < values[i - 1] && values[i] < values[i + 1];
        for (k, &i) in kept.iter().enumerate() {
            prop_assert!(is_min(i) && values[i] < tr);
            for &j in &kept[..k] {
                prop_assert!(i.abs_diff(j) >= sep);
                prop_assert!(values[j] <= values[i]);
            }
        }
        // Every dropped candidate is shadowed by a stronger kept one.
        for i in (0..n).filter(|&i| is_min(i) && values[i] < tr && !kept.contains(&i)) {
            prop_assert!(kept.iter().any(|&j| j.abs_diff(i) < sep && values[j] <= values[i]));
        }
    }
}

#[test]
fn tracks_stop_at_the_vanishing_row() {
    let field = VanishingField::new(RowProfile::new(0, vec![50.0; 40]), RowProfile::new(0, vec![20.0; 40])).unwrap();
    let track = lane_track(10.0, &field, 0..=39);
    assert_eq!(track.last().unwrap().1, 20);
}
