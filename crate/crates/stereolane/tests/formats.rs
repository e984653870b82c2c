use proptest::prelude::*;
use stereolane::config::PipelineConfig;
use stereolane::io::{read_lanes_csv, read_pgm16, write_counts_pgm, write_disparity_pgm, write_lanes_csv};
use stereolane_core::lanes::{Lane, LaneSet};
use stereolane_core::Grid;

fn grid<T: Clone + core::fmt::Debug>(cell: impl Strategy<Value = T> + Clone) -> impl Strategy<Value = Grid<T>> {
    (1usize..20, 1usize..12).prop_flat_map(move |(w, h)| {
        prop::collection::vec(cell.clone(), w * h).prop_map(move |d| Grid::from_vec(w, h, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disparity_pgm_round_trips(disp in grid(0u16..256)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.pgm");
        write_disparity_pgm(&path, &disp).unwrap();
        prop_assert_eq!(read_pgm16(&path).unwrap(), disp.map(|&d| d * 256));
    }

    #[test]
    fn counts_saturate_at_sixteen_bits(counts in grid(0u32..200_000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        write_counts_pgm(&path, &counts).unwrap();
        prop_assert_eq!(read_pgm16(&path).unwrap(), counts.map(|&c| c.min(65535) as u16));
    }

    #[test]
    fn lane_polylines_round_trip(lanes in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 0..30), 0..5)) {
        let set = LaneSet {
            lanes: lanes
                .iter()
                .enumerate()
                .map(|(i, us)| Lane {
                    start_column: i as i64,
                    index: i,
                    energy: -(i as f64),
                    polyline: us.iter().enumerate().map(|(k, &u)| (u, 300 - k)).collect(),
                })
                .collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lanes.csv");
        write_lanes_csv(&path, &set).unwrap();
        let rows = read_lanes_csv(&path).unwrap();
        let expected: Vec<(usize, usize, f64)> = set
            .lanes
            .iter()
            .enumerate()
            .flat_map(|(id, l)| l.polyline.iter().map(move |&(u, v)| (id, v, u)))
            .collect();
        prop_assert_eq!(rows, expected);
    }

    #[test]
    fn config_text_round_trips(
        rho in 1usize..6,
        d_max in 16u16..300,
        lambda_y in 0.0f64..100.0,
        kappa in 1e-6f64..1e6,
        tr_lpv in prop::option::of(-1e6f64..0.0),
    ) {
        let cfg = PipelineConfig { rho, d_max, lambda_y, kappa, tr_lpv, ..PipelineConfig::default() };
        prop_assert_eq!(PipelineConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}
