//! Writes detection results, and optionally every intermediate product, to a
//! directory.

use std::path::{Path, PathBuf};

use stereolane_core::{GrayImage, Grid};

use crate::io::{
    write_counts_pgm, write_disparity_pgm, write_gray_png, write_json, write_lanes_csv, write_mask_png,
    write_overlay_png, write_pairs_csv, write_real_pgm, IoError,
};
use crate::pipeline::Detection;

/// Files written on every run.
pub const STANDARD_OUTPUTS: [&str; 7] = [
    "disparity.pgm",
    "vdisparity.pgm",
    "vpx_accumulator.pgm",
    "edges.png",
    "lanes.csv",
    "overlay.png",
    "report.json",
];

/// Extra file per stage written with `--emit-all`, indexed by stage number
/// minus one. Stages already covered by a standard output reuse it.
pub const STAGE_OUTPUTS: [&str; 12] = [
    "block_sigma.pgm",
    "left_disparity.pgm",
    "right_disparity.pgm",
    "disparity.pgm",
    "vdisparity.pgm",
    "road_path.csv",
    "road_mask.png",
    "filtered.png",
    "edges.png",
    "vpx_accumulator.pgm",
    "vpx_path.csv",
    "lane_energy.csv",
];

/// Writes the standard outputs and, with `emit_all`, one file per stage.
/// Returns the paths written.
pub fn write_outputs(dir: &Path, left: &GrayImage, det: &Detection, emit_all: bool) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let a = &det.artifacts;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    write_disparity_pgm(&out("disparity.pgm"), &a.disparity)?;
    write_counts_pgm(&out("vdisparity.pgm"), a.vdisparity.counts())?;
    write_counts_pgm(&out("vpx_accumulator.pgm"), &a.accumulator.counts)?;
    write_mask_png(&out("edges.png"), &a.edges.to_mask(left.width(), left.height()))?;
    write_lanes_csv(&out("lanes.csv"), &det.lanes)?;
    write_overlay_png(&out("overlay.png"), left, &det.lanes)?;
    write_json(&out("report.json"), &det.report)?;
    if emit_all {
        let sigma: &Grid<f64> = &a.stats_left.sigma;
        let top = sigma.data().iter().cloned().fold(0.0, f64::max);
        write_real_pgm(&out("block_sigma.pgm"), sigma, 0.0, top)?;
        write_disparity_pgm(&out("left_disparity.pgm"), &a.left_disparity)?;
        write_disparity_pgm(&out("right_disparity.pgm"), &a.right_disparity)?;
        write_pairs_csv(&out("road_path.csv"), ["d", "v"], a.vpath.points.iter().copied())?;
        write_mask_png(&out("road_mask.png"), &a.road_mask.mask)?;
        write_gray_png(&out("filtered.png"), &a.filtered)?;
        write_pairs_csv(&out("vpx_path.csv"), ["u", "v"], a.upath.points.iter().copied())?;
        write_pairs_csv(
            &out("lane_energy.csv"),
            ["u", "energy"],
            a.energy
                .values
                .iter()
                .enumerate()
                .map(|(i, &e)| (a.energy.frame.column(i), e)),
        )?;
    }
    Ok(written)
}
