use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use stereolane::bench::{run_bench, BenchParams};
use stereolane::config::PipelineConfig;
use stereolane::io::{read_gray, write_disparity_pgm, write_gray_png, write_json, write_text};
use stereolane::output::write_outputs;
use stereolane::pipeline::run_pipeline_with_threads;
use stereolane::testkit::{gen_scene, random_scene_params, SceneParams, TrueLane};

#[derive(Parser)]
#[command(name = "stereolane", version, about = "Lane detection from rectified stereo pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect lanes in a rectified stereo pair.
    Detect {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write one file per pipeline stage.
        #[arg(long)]
        emit_all: bool,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override a config key, e.g. `--set d_max=96`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Write a synthetic stereo scene with ground truth.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Draw a random curved-road scene instead of the default one.
        #[arg(long)]
        random: bool,
    },
    /// Time every stage and the memoised block matcher on a synthetic pair.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    params: &'a SceneParams,
    beta: [f64; 3],
    horizon_row: usize,
    first_row: usize,
    vpx: &'a [f64],
    vpy: &'a [f64],
    lanes: &'a [TrueLane],
}

fn synth(out_dir: &Path, seed: u64, random: bool) -> Result<()> {
    let params = if random {
        random_scene_params(seed)
    } else {
        SceneParams {
            seed,
            ..SceneParams::default()
        }
    };
    let scene = gen_scene(&params).context("generating scene")?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_gray_png(&out_dir.join("left.png"), &scene.left)?;
    write_gray_png(&out_dir.join("right.png"), &scene.right)?;
    write_disparity_pgm(&out_dir.join("disparity_gt.pgm"), &scene.true_disparity)?;
    write_json(
        &out_dir.join("ground_truth.json"),
        &GroundTruth {
            params: &params,
            beta: scene.true_beta,
            horizon_row: scene.horizon,
            first_row: scene.true_vp.vpx.first_row,
            vpx: &scene.true_vp.vpx.values,
            vpy: &scene.true_vp.vpy.values,
            lanes: &scene.true_lanes,
        },
    )?;
    // A config whose disparity range covers the scene.
    let cfg = PipelineConfig {
        d_max: params.max_disparity().max(56) + 8,
        ..PipelineConfig::default()
    };
    write_text(&out_dir.join("config.toml"), &cfg.to_toml())?;
    println!("wrote scene (seed {seed}) to {}", out_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Detect {
            left,
            right,
            config,
            out_dir,
            emit_all,
            threads,
            overrides,
        } => {
            let cfg = PipelineConfig::load_with_overrides(&config, &overrides)?;
            let l = read_gray(&left)?;
            let r = read_gray(&right)?;
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let det = run_pipeline_with_threads(&l, &r, &cfg, threads)?;
            let files = write_outputs(&out_dir, &l, &det, emit_all)?;
            println!(
                "{} lane(s), horizon row {}, {:.3} s; {} file(s) in {}",
                det.lanes.len(),
                det.report.horizon_row,
                det.report.total_seconds,
                files.len(),
                out_dir.display()
            );
            for lane in &det.lanes.lanes {
                println!("  start column {:>5}  energy {:>12.3}", lane.start_column, lane.energy);
            }
        }
        Command::Synth { out_dir, seed, random } => synth(&out_dir, seed, random)?,
        Command::Bench {
            config,
            reps,
            width,
            height,
            seed,
            threads,
            json,
            overrides,
        } => {
            let cfg = PipelineConfig::load_with_overrides(&config, &overrides)?;
            let params = BenchParams {
                width,
                height,
                repetitions: reps,
                seed,
                threads,
            };
            let report = run_bench(&cfg, &params)?;
            print!("{}", report.table());
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
    }
    Ok(())
}
