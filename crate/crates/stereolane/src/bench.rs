//! Per-stage timings on a synthetic pair, and the speed-up of memoised block
//! statistics over recomputing them for every disparity candidate.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use stereolane_core::stereo::{estimate_disparity_full, estimate_disparity_naive};

use crate::config::PipelineConfig;
use crate::pipeline::{run_pipeline, PipelineError, Stage};
use crate::testkit::{gen_scene, SceneParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub width: usize,
    pub height: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Worker threads for the timed runs.
    pub threads: usize,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            repetitions: 3,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMedian {
    pub stage: u8,
    pub name: String,
    pub median_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub params: BenchParams,
    /// Set when a single repetition makes the medians mere samples.
    pub low_confidence: bool,
    pub stages: Vec<StageMedian>,
    pub pipeline_median_seconds: f64,
    pub lanes_detected: usize,
    pub memoised_seconds: f64,
    pub naive_seconds: f64,
    /// `naive_seconds / memoised_seconds`.
    pub eta: f64,
    /// Whether both full-range matchers produced the same disparity map.
    pub identical_disparity: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("scene generation failed: {0}")]
    Scene(stereolane_core::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("matcher failed: {0}")]
    Matcher(stereolane_core::Error),
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Scene sized for the benchmark whose disparities fit `d_max`.
pub fn bench_scene(params: &BenchParams, d_max: u16) -> SceneParams {
    let (w, h) = (params.width as f64, params.height as f64);
    let horizon = (0.375 * h).round();
    let d_bottom = (0.6 * f64::from(d_max)).clamp(4.0, 0.15 * w);
    SceneParams {
        width: params.width,
        height: params.height,
        beta: SceneParams::curved_beta(horizon, h - 1.0, d_bottom, 0.3),
        lanes: vec![(0.3 * w).round(), (0.5 * w).round(), (0.7 * w).round()],
        vpx_base: (0.5 * w).round(),
        vpx_bend: 0.05 * w,
        seed: params.seed,
        ..SceneParams::default()
    }
    .with_detection_texture()
}

pub fn run_bench(cfg: &PipelineConfig, params: &BenchParams) -> Result<BenchReport, BenchError> {
    let reps = params.repetitions.max(1);
    let scene = gen_scene(&bench_scene(params, cfg.d_max)).map_err(BenchError::Scene)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        let mut per_stage = vec![Vec::new(); Stage::ALL.len()];
        let mut totals = Vec::new();
        let mut lanes = 0;
        for _ in 0..reps {
            let t = Instant::now();
            let det = run_pipeline(&scene.left, &scene.right, cfg)?;
            totals.push(t.elapsed().as_secs_f64());
            for s in &det.report.stages {
                per_stage[usize::from(s.stage) - 1].push(s.seconds);
            }
            lanes = det.lanes.len();
        }
        let stereo = cfg.stereo();
        let (mut memo, mut naive) = (Vec::new(), Vec::new());
        let mut identical = true;
        for _ in 0..reps {
            let t = Instant::now();
            let a = estimate_disparity_full(&scene.left, &scene.right, &stereo).map_err(BenchError::Matcher)?;
            memo.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let b = estimate_disparity_naive(&scene.left, &scene.right, &stereo).map_err(BenchError::Matcher)?;
            naive.push(t.elapsed().as_secs_f64());
            identical &= a == b;
        }
        let (memo_s, naive_s) = (median(&mut memo), median(&mut naive));
        Ok(BenchReport {
            params: params.clone(),
            low_confidence: reps == 1,
            stages: Stage::ALL
                .iter()
                .zip(per_stage.iter_mut())
                .map(|(s, xs)| StageMedian {
                    stage: s.number(),
                    name: s.name().to_string(),
                    median_seconds: median(xs),
                })
                .collect(),
            pipeline_median_seconds: median(&mut totals),
            lanes_detected: lanes,
            memoised_seconds: memo_s,
            naive_seconds: naive_s,
            eta: naive_s / memo_s,
            identical_disparity: identical,
        })
    })
}

impl BenchReport {
    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "scene {}x{}, {} repetition(s){}\n",
            self.params.width,
            self.params.height,
            self.params.repetitions.max(1),
            if self.low_confidence {
                " [low confidence: single sample]"
            } else {
                ""
            }
        );
        s.push_str(&format!("{:>5}  {:<26}{:>12}\n", "stage", "name", "median ms"));
        for st in &self.stages {
            s.push_str(&format!(
                "{:>5}  {:<26}{:>12.3}\n",
                st.stage,
                st.name,
                st.median_seconds * 1e3
            ));
        }
        s.push_str(&format!(
            "{:>5}  {:<26}{:>12.3}\n",
            "",
            "pipeline total",
            self.pipeline_median_seconds * 1e3
        ));
        s.push_str(&format!(
            "full-range NCC: memoised {:.3} ms, naive {:.3} ms, eta = {:.2}, identical = {}\n",
            self.memoised_seconds * 1e3,
            self.naive_seconds * 1e3,
            self.eta,
            self.identical_disparity
        ));
        s
    }
}
