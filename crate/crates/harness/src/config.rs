//! Run configuration, loadable from JSON. Every field has a default so a
//! partial file only overrides what it names.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use tether_core::optimizer::{SolverConfig, Weights, DEFAULT_TETHER_SAMPLES};
use tether_core::planner::PlannerParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpSceneParams {
    pub min_boxes: usize,
    pub max_boxes: usize,
    pub max_triangles: usize,
    pub min_span: f64,
    pub max_span: f64,
    /// Maximum tether length as a multiple of the chord.
    pub min_slack: f64,
    pub max_slack: f64,
}

impl Default for DpSceneParams {
    fn default() -> Self {
        Self { min_boxes: 1, max_boxes: 4, max_triangles: 2, min_span: 2.0, max_span: 15.0, min_slack: 1.1, max_slack: 1.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub planner: PlannerParams,
    pub weights: Weights,
    pub solver: SolverConfig,
    /// Inflation as a fraction of the maximum tether length.
    pub tau_fraction: f64,
    /// Length step of the numeric catenary baseline.
    pub cdp_dl: f64,
    /// Samples per curve in the numeric catenary baseline.
    pub cdp_samples: usize,
    pub tether_samples_m: usize,
    pub fit_cases: usize,
    pub fit_eps: f64,
    pub fit_sampling_points: usize,
    pub dp_scenes: usize,
    pub dp_scene: DpSceneParams,
    pub repeats: usize,
    pub resolution: f64,
}

impl Default for Config {
    fn default() -> Self {
        let planner = PlannerParams {
            clearance_ugv: 1.3,
            clearance_uav: 1.3,
            clearance_tether: 0.2,
            l_max: 10.0,
            ..PlannerParams::default()
        };
        Self {
            planner,
            weights: Weights::default(),
            solver: SolverConfig::default(),
            tau_fraction: 0.035,
            cdp_dl: 0.1,
            cdp_samples: 50,
            tether_samples_m: DEFAULT_TETHER_SAMPLES,
            fit_cases: 100,
            fit_eps: 1e-2,
            fit_sampling_points: 5,
            dp_scenes: 500,
            dp_scene: DpSceneParams::default(),
            repeats: 100,
            resolution: 0.25,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
