//! The twelve-stage detector: disparity, road profile, road-area edges,
//! vanishing points and lane validation.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use stereolane_core::dp::DpPath;
use stereolane_core::fit::RansacOutcome;
use stereolane_core::lanes::{
    aggregate_energy, build_maps, default_tr_lpv, select_lanes, EnergyHistogram, LaneSet, VanishingField,
    WeightedGxMaps,
};
use stereolane_core::preprocess::{
    bilateral_filter, edge_map, road_mask, sobel_gradients, EdgeSet, GradientField, RoadMask,
};
use stereolane_core::road::{
    build_vdisparity, dp_extract_vpath, ransac_beta, RoadProfile, VDisparityHist, VPathParams,
};
use stereolane_core::stereo::{lrc_check, BlockStats, MatchContext};
use stereolane_core::vanish::{
    accumulate_dense_vpx, dp_extract_upath, ransac_gamma, sparse_vpx, vpx_profile, ColumnFrame, DenseVpxAccumulator,
    RowProfile, SparseVpxMap, UPathParams,
};
use stereolane_core::{DisparityMap, Error, GrayImage, INVALID_DISPARITY};

use crate::config::{ConfigError, PipelineConfig};

/// Pipeline stages in execution order; the discriminant is the stage number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    BlockStats = 1,
    LeftDisparity = 2,
    RightDisparity = 3,
    ConsistencyCheck = 4,
    VDisparity = 5,
    RoadProfile = 6,
    RoadMask = 7,
    Bilateral = 8,
    Edges = 9,
    VanishingVotes = 10,
    VanishingProfile = 11,
    LaneValidation = 12,
}

impl Stage {
    pub const ALL: [Stage; 12] = [
        Stage::BlockStats,
        Stage::LeftDisparity,
        Stage::RightDisparity,
        Stage::ConsistencyCheck,
        Stage::VDisparity,
        Stage::RoadProfile,
        Stage::RoadMask,
        Stage::Bilateral,
        Stage::Edges,
        Stage::VanishingVotes,
        Stage::VanishingProfile,
        Stage::LaneValidation,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::BlockStats => "block statistics",
            Stage::LeftDisparity => "left disparity",
            Stage::RightDisparity => "right disparity",
            Stage::ConsistencyCheck => "left-right consistency",
            Stage::VDisparity => "v-disparity",
            Stage::RoadProfile => "road profile",
            Stage::RoadMask => "road mask",
            Stage::Bilateral => "bilateral filter",
            Stage::Edges => "edge detection",
            Stage::VanishingVotes => "vanishing-point votes",
            Stage::VanishingProfile => "vanishing-point profile",
            Stage::LaneValidation => "lane validation",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {} ({}): {source}", stage.number(), stage.name())]
    Stage { stage: Stage, source: Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            PipelineError::Config(_) => None,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: u8,
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RansacSummary {
    pub iterations: usize,
    pub inliers: usize,
    pub points: usize,
    pub inlier_fraction: f64,
    pub converged: bool,
}

impl RansacSummary {
    fn new(o: &RansacOutcome, points: usize) -> Self {
        Self {
            iterations: o.iterations,
            inliers: o.inliers.len(),
            points,
            inlier_fraction: o.inlier_fraction,
            converged: o.converged,
        }
    }
}

/// Counts of skipped, rejected or degenerate items along the way.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub invalid_left: usize,
    pub lrc_rejected: usize,
    pub valid_disparities: usize,
    pub road_pixels: usize,
    pub edge_pixels: usize,
    pub votes: usize,
    pub skipped_flat_gradient: usize,
    pub skipped_rows: usize,
    pub horizon_clamped: bool,
    pub truncated_tracks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneReport {
    pub id: usize,
    pub start_column: i64,
    pub energy: f64,
    pub polyline: Vec<(f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub width: usize,
    pub height: usize,
    pub stages: Vec<StageTiming>,
    pub total_seconds: f64,
    pub beta: [f64; 3],
    pub gamma: [f64; 5],
    pub horizon_row: usize,
    pub v_max: usize,
    pub road_ransac: RansacSummary,
    pub vanishing_ransac: RansacSummary,
    pub tr_lpv: f64,
    pub tr_lpv_auto: bool,
    pub counters: Counters,
    pub lane_count: usize,
    pub lanes: Vec<LaneReport>,
}

/// Every intermediate product, in stage order.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub stats_left: BlockStats,
    pub left_disparity: DisparityMap,
    pub right_disparity: DisparityMap,
    pub disparity: DisparityMap,
    pub vdisparity: VDisparityHist,
    pub vpath: DpPath,
    pub road: RoadProfile,
    pub road_mask: RoadMask,
    pub filtered: GrayImage,
    pub gradients: GradientField,
    pub edges: EdgeSet,
    pub sparse: SparseVpxMap,
    pub accumulator: DenseVpxAccumulator,
    pub upath: DpPath,
    pub vanishing: VanishingField,
    pub maps: WeightedGxMaps,
    pub energy: EnergyHistogram,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub lanes: LaneSet,
    pub report: PipelineReport,
    pub artifacts: Artifacts,
}

struct Clock {
    timings: Vec<StageTiming>,
}

impl Clock {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push(StageTiming {
            stage: stage.number(),
            name: stage.name().to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn count_invalid(d: &DisparityMap) -> usize {
    d.data().iter().filter(|&&x| x == INVALID_DISPARITY).count()
}

/// Runs all twelve stages on a rectified pair using the current rayon pool.
pub fn run_pipeline(left: &GrayImage, right: &GrayImage, cfg: &PipelineConfig) -> Result<Detection, PipelineError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut clock = Clock { timings: Vec::new() };
    let stereo = cfg.stereo();
    let (w, h) = (left.width(), left.height());

    let ctx = clock.time(Stage::BlockStats, || {
        stereo.validate().at(Stage::BlockStats)?;
        MatchContext::new(left, right, cfg.rho, cfg.sigma_floor).at(Stage::BlockStats)
    })?;
    let left_disparity = clock.time(Stage::LeftDisparity, || ctx.left_srp(&stereo).at(Stage::LeftDisparity))?;
    let right_disparity = clock.time(Stage::RightDisparity, || {
        ctx.right_srp(&stereo).at(Stage::RightDisparity)
    })?;
    let disparity = clock.time(Stage::ConsistencyCheck, || {
        lrc_check(&left_disparity, &right_disparity, cfg.tr_lrc).at(Stage::ConsistencyCheck)
    })?;

    let vdisparity = clock.time(Stage::VDisparity, || Ok(build_vdisparity(&disparity, cfg.d_max)))?;
    // Rows below the last matchable one carry no disparity.
    let v_max = h - 1 - cfg.rho;
    let (vpath, road, road_outcome) = clock.time(Stage::RoadProfile, || {
        let params = VPathParams {
            lambda: cfg.lambda_y,
            max_step: cfg.step_y,
            smoothness: cfg.smoothness(),
        };
        let path = dp_extract_vpath(&vdisparity, &params).at(Stage::RoadProfile)?;
        if path.no_evidence {
            return Err(Error::NoEvidence).at(Stage::RoadProfile);
        }
        let (beta, outcome) = ransac_beta(&path, &cfg.road_ransac()).at(Stage::RoadProfile)?;
        let road = RoadProfile::new(beta, v_max).at(Stage::RoadProfile)?;
        Ok((path, road, outcome))
    })?;
    let rows = road.rows();
    let horizon = road.horizon_row();

    let mask = clock.time(Stage::RoadMask, || Ok(road_mask(&disparity, &road, cfg.varpi)))?;
    let filtered = clock.time(Stage::Bilateral, || {
        bilateral_filter(left, cfg.sigma_s, cfg.sigma_r, cfg.bf_window / 2).at(Stage::Bilateral)
    })?;
    let (gradients, edges) = clock.time(Stage::Edges, || {
        let g = sobel_gradients(&filtered).at(Stage::Edges)?;
        let e = edge_map(&g, cfg.sobel_threshold / 255.0, &mask).at(Stage::Edges)?;
        Ok((g, e))
    })?;

    let frame = ColumnFrame::new(w, cfg.xi).at(Stage::VanishingVotes)?;
    let (vpy, sparse, accumulator) = clock.time(Stage::VanishingVotes, || {
        let vpy = RowProfile::new(horizon, road.vpy().at(Stage::VanishingVotes)?);
        let sparse = sparse_vpx(&edges, &vpy, frame, cfg.eps_g);
        let acc = accumulate_dense_vpx(&sparse, cfg.chi, cfg.rho_vote, rows.clone()).at(Stage::VanishingVotes)?;
        Ok((vpy, sparse, acc))
    })?;
    let (upath, gamma, vanishing, vp_outcome) = clock.time(Stage::VanishingProfile, || {
        let params = UPathParams {
            lambda: cfg.lambda_x,
            max_shift: cfg.step_x,
            smoothness: cfg.smoothness(),
        };
        let path = dp_extract_upath(&accumulator, &params).at(Stage::VanishingProfile)?;
        if path.no_evidence {
            return Err(Error::NoEvidence).at(Stage::VanishingProfile);
        }
        let (profile, outcome) = ransac_gamma(&path, &cfg.vanishing_ransac(), cfg.kappa).at(Stage::VanishingProfile)?;
        let field =
            VanishingField::new(vpx_profile(&profile, rows.clone()), vpy.clone()).at(Stage::VanishingProfile)?;
        Ok((path, profile.gamma, field, outcome))
    })?;

    let (maps, energy, lanes, tr_lpv) = clock.time(Stage::LaneValidation, || {
        let maps = build_maps(&gradients, &edges, &vanishing, cfg.sigma_g, cfg.nu, cfg.varsigma);
        let energy =
            aggregate_energy(&maps.m1, &vanishing, frame, cfg.lambda_g, rows.clone()).at(Stage::LaneValidation)?;
        let tr = cfg.tr_lpv.unwrap_or_else(|| default_tr_lpv(&maps.m1, rows.clone()));
        let lanes = select_lanes(&energy, tr, cfg.min_lane_sep, &vanishing, rows.clone());
        Ok((maps, energy, lanes, tr))
    })?;

    let full_track = rows.clone().count();
    let counters = Counters {
        invalid_left: count_invalid(&left_disparity),
        lrc_rejected: count_invalid(&disparity) - count_invalid(&left_disparity),
        valid_disparities: disparity.data().len() - count_invalid(&disparity),
        road_pixels: mask.count(),
        edge_pixels: edges.len(),
        votes: sparse.votes.len(),
        skipped_flat_gradient: sparse.skipped_flat,
        skipped_rows: sparse.skipped_rows,
        horizon_clamped: road.horizon.clamped,
        truncated_tracks: lanes.lanes.iter().filter(|l| l.polyline.len() < full_track).count(),
    };
    let report = PipelineReport {
        width: w,
        height: h,
        stages: clock.timings,
        total_seconds: start.elapsed().as_secs_f64(),
        beta: road.beta,
        gamma,
        horizon_row: horizon,
        v_max,
        road_ransac: RansacSummary::new(&road_outcome, vpath.points.len()),
        vanishing_ransac: RansacSummary::new(&vp_outcome, upath.points.len()),
        tr_lpv,
        tr_lpv_auto: cfg.tr_lpv.is_none(),
        counters,
        lane_count: lanes.len(),
        lanes: lanes
            .lanes
            .iter()
            .enumerate()
            .map(|(id, l)| LaneReport {
                id,
                start_column: l.start_column,
                energy: l.energy,
                polyline: l.polyline.clone(),
            })
            .collect(),
    };
    Ok(Detection {
        lanes,
        report,
        artifacts: Artifacts {
            stats_left: ctx.stats_left().clone(),
            left_disparity,
            right_disparity,
            disparity,
            vdisparity,
            vpath,
            road,
            road_mask: mask,
            filtered,
            gradients,
            edges,
            sparse,
            accumulator,
            upath,
            vanishing,
            maps,
            energy,
        },
    })
}

/// Runs the pipeline on a dedicated pool of `threads` workers. Results do not
/// depend on the thread count.
pub fn run_pipeline_with_threads(
    left: &GrayImage,
    right: &GrayImage,
    cfg: &PipelineConfig,
    threads: usize,
) -> Result<Detection, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| run_pipeline(left, right, cfg))
}
