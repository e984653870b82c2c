//! Synthetic stereo scenes with ground truth, and brute-force reference
//! implementations used by the tests.

pub mod oracles;
mod scene;

pub use scene::{
    gen_scene, random_scene_params, score_detection, DetectionScore, SceneParams, SyntheticScene, TrueLane,
};
