use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use stereolane_core::lanes::{lane_track, LaneSet, VanishingField};
use stereolane_core::road::{eval_parabola, horizon_row, vpy_profile, RoadProfile};
use stereolane_core::vanish::RowProfile;
use stereolane_core::{DisparityMap, Error, GrayImage, Grid, Result};

/// Everything needed to render a scene. The road occupies the rows from the
/// horizon of `beta` down to the bottom of the image, at disparity
/// `round(f(v))`; everything above the horizon is a backdrop at infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// Road profile `f(v) = b0 + b1 v + b2 v^2`.
    pub beta: [f64; 3],
    /// Lane centre columns on the bottom row.
    pub lanes: Vec<f64>,
    /// `V_px` on the bottom row.
    pub vpx_base: f64,
    /// `V_px(v) = vpx_base + vpx_bend * t^2`, `t` running from 0 at the
    /// bottom row to 1 at the horizon.
    pub vpx_bend: f64,
    /// Lane width in pixels on the bottom row; shrinks with the disparity.
    pub lane_width: f64,
    pub texture_amplitude: f64,
    /// Lattice spacing of the value-noise texture.
    pub texture_cell: f64,
    pub noise_sigma: f64,
    pub road_intensity: f64,
    pub backdrop_intensity: f64,
    pub lane_intensity: f64,
    /// Share of the road texture kept under the paint: 1 adds the paint on
    /// top of the texture, 0 paints flat.
    pub lane_texture: f64,
    /// Half-width in pixels of the smooth ramp at each painted edge, as an
    /// optical blur would leave it; 0 gives hard, pixel-area edges.
    pub lane_edge_softness: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 640,
            height: 360,
            beta: [-40.0, 0.4, 0.0005],
            lanes: vec![200.0, 330.0, 460.0],
            vpx_base: 330.0,
            vpx_bend: 20.0,
            lane_width: 6.0,
            texture_amplitude: 0.35,
            texture_cell: 3.0,
            noise_sigma: 0.005,
            road_intensity: 0.4,
            backdrop_intensity: 0.5,
            lane_intensity: 0.9,
            lane_texture: 1.0,
            lane_edge_softness: 3.0,
            seed: 0,
        }
    }
}

impl SceneParams {
    /// Road profile reaching `d_bottom` on the bottom row from zero at
    /// `horizon`: `f = d_bottom ((1 - c) t + c t^2)` with
    /// `t = (v - horizon) / (bottom - horizon)`.
    pub fn curved_beta(horizon: f64, bottom: f64, d_bottom: f64, c: f64) -> [f64; 3] {
        let l = bottom - horizon;
        let a = d_bottom * (1.0 - c) / l;
        let q = d_bottom * c / (l * l);
        [q * horizon * horizon - a * horizon, a - 2.0 * q * horizon, q]
    }

    /// Fainter texture and flat paint with soft edges. Suited to scenes whose
    /// disparity gradient is mild enough for the matcher to lock on without
    /// the strong default texture, which would otherwise flood the
    /// vanishing-point votes with texture edges.
    pub fn with_detection_texture(self) -> Self {
        Self {
            texture_amplitude: 0.15,
            road_intensity: 0.3,
            lane_texture: 0.0,
            lane_edge_softness: 1.5,
            ..self
        }
    }

    /// Largest true disparity in the scene.
    pub fn max_disparity(&self) -> u16 {
        let d = eval_parabola(&self.beta, (self.height - 1) as f64).round();
        d.max(0.0) as u16
    }
}

/// Random detection scene: horizon in [120, 160], bottom disparity in
/// [40, 60], curvature share in [0.15, 0.45], two to four lanes 120-170
/// columns apart within [80, 600], and a `V_px` bend of up to 60 columns.
///
/// Rendered with [`SceneParams::with_detection_texture`].
pub fn random_scene_params(seed: u64) -> SceneParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce9e);
    let (width, height) = (640usize, 360usize);
    let bottom = (height - 1) as f64;
    let horizon = rng.random_range(120.0..=160.0);
    let d_bottom = rng.random_range(40.0..=60.0);
    let c = rng.random_range(0.15..=0.45);
    let n = rng.random_range(2..=4usize);
    let spacing = rng.random_range(120.0..=170.0);
    let span = spacing * (n - 1) as f64;
    let first = rng.random_range(80.0..=600.0 - span);
    let lanes: Vec<f64> = (0..n).map(|i| (first + spacing * i as f64).round()).collect();
    let centre = 0.5 * (lanes[0] + lanes[n - 1]);
    SceneParams {
        width,
        height,
        beta: SceneParams::curved_beta(horizon, bottom, d_bottom, c),
        lanes,
        vpx_base: centre + rng.random_range(-40.0..=40.0),
        vpx_bend: rng.random_range(-60.0..=60.0),
        seed,
        ..SceneParams::default()
    }
    .with_detection_texture()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueLane {
    pub bottom: f64,
    /// `(u, v)` from the bottom row upwards.
    pub polyline: Vec<(f64, usize)>,
}

impl TrueLane {
    pub fn column_at(&self, v: usize) -> Option<f64> {
        self.polyline.iter().find(|p| p.1 == v).map(|p| p.0)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub params: SceneParams,
    pub left: GrayImage,
    pub right: GrayImage,
    pub true_disparity: DisparityMap,
    pub true_beta: [f64; 3],
    pub horizon: usize,
    pub true_vp: VanishingField,
    pub true_lanes: Vec<TrueLane>,
    pub rng_seed: u64,
}

/// Value noise: uniform lattice values in [-1, 1], smoothstep-bilinear
/// interpolation between them.
struct ValueNoise {
    cols: usize,
    lattice: Vec<f64>,
    cell: f64,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: f64, rng: &mut ChaCha8Rng) -> Self {
        let cols = (width as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { cols, lattice, cell }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let (i, j) = (gx.floor() as usize, gy.floor() as usize);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (s(gx - i as f64), s(gy - j as f64));
        let l = |i: usize, j: usize| self.lattice[j * self.cols + i];
        let top = l(i, j) + tx * (l(i + 1, j) - l(i, j));
        let bottom = l(i, j + 1) + tx * (l(i + 1, j + 1) - l(i, j + 1));
        top + ty * (bottom - top)
    }
}

/// Paint coverage of pixel `x` for a stripe `[c - w/2, c + w/2]`. With
/// `soft == 0` this is the covered fraction of `[x - 0.5, x + 0.5]`;
/// otherwise each edge is a smoothstep ramp of half-width `soft` centred on
/// it.
fn coverage(x: f64, c: f64, w: f64, soft: f64) -> f64 {
    if soft <= 0.0 {
        let lo = (x - 0.5).max(c - 0.5 * w);
        let hi = (x + 0.5).min(c + 0.5 * w);
        return (hi - lo).clamp(0.0, 1.0);
    }
    let ramp = |z: f64| {
        let t = (0.5 + 0.5 * z / soft).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    };
    ramp(x - (c - 0.5 * w)) * ramp((c + 0.5 * w) - x)
}

/// Renders a scene. The right image samples the same world strip as the left
/// one, shifted by the integer road disparity of each row, so the pair is an
/// exact horizontal warp before noise is added.
pub fn gen_scene(params: &SceneParams) -> Result<SyntheticScene> {
    let (w, h) = (params.width, params.height);
    if w < 16 || h < 16 {
        return Err(Error::InvalidParameter("scene must be at least 16x16".into()));
    }
    let bottom = h - 1;
    let horizon = horizon_row(&params.beta, bottom);
    if horizon.clamped {
        return Err(Error::InvalidParameter(
            "road profile has no horizon inside the image".into(),
        ));
    }
    let road = RoadProfile::new(params.beta, bottom)?;
    let h0 = horizon.row;
    let disparity: Vec<u16> = (0..h)
        .map(|v| {
            if v < h0 {
                0
            } else {
                road.disparity(v as f64).round().max(0.0) as u16
            }
        })
        .collect();
    let max_d = *disparity.iter().max().unwrap_or(&0) as usize;

    let rows = h0..=bottom;
    let vpy = vpy_profile(&params.beta, rows.clone())?;
    let span = (bottom - h0).max(1) as f64;
    let vpx: Vec<f64> = rows
        .clone()
        .map(|v| {
            let t = (bottom - v) as f64 / span;
            params.vpx_base + params.vpx_bend * t * t
        })
        .collect();
    let field = VanishingField::new(RowProfile::new(h0, vpx), RowProfile::new(h0, vpy))?;
    let true_lanes: Vec<TrueLane> = params
        .lanes
        .iter()
        .map(|&b| TrueLane {
            bottom: b,
            polyline: lane_track(b, &field, rows.clone()),
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let world_w = w + max_d + 1;
    let noise = ValueNoise::new(world_w, h, params.texture_cell.max(1.0), &mut rng);
    let d_bottom = road.disparity(bottom as f64).max(1e-9);
    let mut world = Grid::filled(world_w, h, 0.0);
    for v in 0..h {
        let base = if v < h0 {
            params.backdrop_intensity
        } else {
            params.road_intensity
        };
        let row = world.row_mut(v);
        for (x, px) in row.iter_mut().enumerate() {
            *px = base + params.texture_amplitude * noise.at(x as f64, v as f64);
        }
        if v < h0 {
            continue;
        }
        let width = (params.lane_width * road.disparity(v as f64) / d_bottom).max(1.0);
        for lane in &true_lanes {
            let Some(c) = lane.column_at(v) else { continue };
            let reach = 0.5 * width + params.lane_edge_softness + 1.0;
            let lo = (c - reach).floor().max(0.0) as usize;
            let hi = ((c + reach).ceil().max(0.0) as usize).min(world_w - 1);
            for (x, px) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
                // Texture kept under the paint keeps lanes distinguishable
                // from each other for the matcher.
                let paint = params.lane_intensity + params.lane_texture * (*px - params.road_intensity);
                *px += coverage(x as f64, c, width, params.lane_edge_softness) * (paint - *px);
            }
        }
    }

    let gauss = Normal::new(0.0, params.noise_sigma.max(0.0))
        .map_err(|_| Error::InvalidParameter("noise sigma must be finite".into()))?;
    let mut render = |shift: &dyn Fn(usize) -> usize| {
        let g = Grid::from_fn(w, h, |u, v| {
            let n = if params.noise_sigma > 0.0 {
                gauss.sample(&mut rng)
            } else {
                0.0
            };
            (world[(u + shift(v), v)] + n).clamp(0.0, 1.0)
        });
        GrayImage::from_grid_clamped(g)
    };
    let left = render(&|_| 0)?;
    let right = render(&|v| disparity[v] as usize)?;
    let true_disparity = Grid::from_fn(w, h, |_, v| disparity[v]);
    Ok(SyntheticScene {
        params: params.clone(),
        left,
        right,
        true_disparity,
        true_beta: params.beta,
        horizon: h0,
        true_vp: field,
        true_lanes,
        rng_seed: params.seed,
    })
}

/// Detection tally at one image row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub truth: usize,
    pub matched: usize,
    pub false_positives: usize,
}

/// Matches detected lanes to ground truth at row `v`, nearest pairs first,
/// accepting pairs at most `tolerance` columns apart.
pub fn score_detection(lanes: &LaneSet, truth: &[TrueLane], v: usize, tolerance: f64) -> DetectionScore {
    let detected: Vec<f64> = lanes
        .lanes
        .iter()
        .filter_map(|l| l.polyline.iter().find(|p| p.1 == v).map(|p| p.0))
        .collect();
    let expected: Vec<f64> = truth.iter().filter_map(|t| t.column_at(v)).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for (j, e) in expected.iter().enumerate() {
            let gap = (d - e).abs();
            if gap <= tolerance {
                pairs.push((gap, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut used_d, mut used_e) = (vec![false; detected.len()], vec![false; expected.len()]);
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !used_d[i] && !used_e[j] {
            used_d[i] = true;
            used_e[j] = true;
            matched += 1;
        }
    }
    DetectionScore {
        truth: expected.len(),
        matched,
        false_positives: lanes.len() - matched,
    }
}
