use stereolane::config::PipelineConfig;
use stereolane::io::{read_lanes_csv, read_pgm16, write_disparity_pgm, write_lanes_csv};
use stereolane::output::{write_outputs, STAGE_OUTPUTS, STANDARD_OUTPUTS};
use stereolane::pipeline::{run_pipeline, PipelineError, Stage};
use stereolane::testkit::{gen_scene, random_scene_params, SceneParams};
use stereolane_core::{GrayImage, Grid};

fn scene_config(params: &SceneParams) -> PipelineConfig {
    PipelineConfig {
        d_max: (params.max_disparity() + 8).max(64),
        ..PipelineConfig::default()
    }
}

#[test]
fn report_mirrors_the_detection() {
    let params = random_scene_params(1);
    let scene = gen_scene(&params).unwrap();
    let det = run_pipeline(&scene.left, &scene.right, &scene_config(&params)).unwrap();
    let stages: Vec<u8> = det.report.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, (1..=12).collect::<Vec<u8>>());
    assert_eq!(det.report.lane_count, det.lanes.len());
    assert!(det.lanes.len() >= 2);
    let v_max = params.height - 1 - 3;
    assert_eq!(det.report.v_max, v_max);
    for (lane, rep) in det.lanes.lanes.iter().zip(&det.report.lanes) {
        assert_eq!(lane.start_column, rep.start_column);
        // Polylines run from the bottom row upwards, one row at a time.
        assert_eq!(lane.polyline[0].1, v_max);
        assert!(lane.polyline.windows(2).all(|p| p[1].1 + 1 == p[0].1));
    }
    // Lanes come strongest first.
    assert!(det.lanes.lanes.windows(2).all(|l| l[0].energy <= l[1].energy));
    // The fitted road profile is close to the generator near the bottom.
    let d = |b: &[f64; 3], v: f64| b[0] + b[1] * v + b[2] * v * v;
    let v = v_max as f64;
    assert!((d(&det.report.beta, v) - d(&scene.true_beta, v)).abs() < 1.5);
}

#[test]
fn mismatched_pair_fails_at_the_first_stage() {
    let a = GrayImage::constant(64, 48, 0.5).unwrap();
    let b = GrayImage::constant(60, 48, 0.5).unwrap();
    match run_pipeline(&a, &b, &PipelineConfig::default()) {
        Err(e) => assert_eq!(e.stage(), Some(Stage::BlockStats)),
        Ok(_) => panic!("sizes differ"),
    }
}

#[test]
fn textureless_pair_has_no_road() {
    let a = GrayImage::constant(64, 48, 0.5).unwrap();
    let err = run_pipeline(&a, &a, &PipelineConfig::default()).unwrap_err();
    assert!(
        matches!(
            err,
            PipelineError::Stage {
                stage: Stage::RoadProfile,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn invalid_config_is_rejected_before_any_work() {
    let a = GrayImage::constant(64, 48, 0.5).unwrap();
    let cfg = PipelineConfig {
        rho: 0,
        ..PipelineConfig::default()
    };
    assert!(matches!(run_pipeline(&a, &a, &cfg), Err(PipelineError::Config(_))));
}

#[test]
fn every_stage_writes_a_file() {
    let params = random_scene_params(4);
    let scene = gen_scene(&params).unwrap();
    let det = run_pipeline(&scene.left, &scene.right, &scene_config(&params)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &scene.left, &det, true).unwrap();
    for name in STANDARD_OUTPUTS.iter().chain(&STAGE_OUTPUTS) {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let disp = read_pgm16(&dir.path().join("disparity.pgm")).unwrap();
    assert_eq!(disp, det.artifacts.disparity.map(|&d| d * 256));
    let rows = read_lanes_csv(&dir.path().join("lanes.csv")).unwrap();
    let points: usize = det.lanes.lanes.iter().map(|l| l.polyline.len()).sum();
    assert_eq!(rows.len(), points);
}

#[test]
fn standard_run_writes_only_the_standard_files() {
    let params = random_scene_params(4);
    let scene = gen_scene(&params).unwrap();
    let det = run_pipeline(&scene.left, &scene.right, &scene_config(&params)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_outputs(dir.path(), &scene.left, &det, false).unwrap();
    assert_eq!(written.len(), STANDARD_OUTPUTS.len());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), STANDARD_OUTPUTS.len());
}

#[test]
fn disparity_files_hold_scaled_samples() {
    let disp = Grid::from_fn(7, 5, |u, v| (u * v) as u16);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.pgm");
    write_disparity_pgm(&path, &disp).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n7 5\n65535\n"));
    assert_eq!(read_pgm16(&path).unwrap(), disp.map(|&d| d * 256));
}

#[test]
fn lanes_csv_round_trips() {
    let params = random_scene_params(6);
    let scene = gen_scene(&params).unwrap();
    let det = run_pipeline(&scene.left, &scene.right, &scene_config(&params)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lanes.csv");
    write_lanes_csv(&path, &det.lanes).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("lane_id,v,u\n"));
    let rows = read_lanes_csv(&path).unwrap();
    let expected: Vec<(usize, usize, f64)> = det
        .lanes
        .lanes
        .iter()
        .enumerate()
        .flat_map(|(id, l)| l.polyline.iter().map(move |&(u, v)| (id, v, u)))
        .collect();
    assert_eq!(rows, expected);
}
