//! RRT* over coupled (UGV, UAV) configurations. Every node is accepted only
//! when a collision-free tether of bounded length joins the two vehicles:
//! either the straight segment is clear, or a decision problem on the
//! vertical plane through them finds a hanging curve.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{solve_cdp_numeric, solve_pdp, Obstacle2D};
use crate::environment::{slice_plane, traversable_ground, EdfGrid, GroundMap};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Rejection-sampling budget per draw.
pub const SAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpMode {
    Pdp,
    Cdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub batch: usize,
    pub max_iters: usize,
    pub step_ugv: f64,
    pub step_uav: f64,
    pub neighbor_radius: f64,
    pub clearance_ugv: f64,
    pub clearance_uav: f64,
    /// Clearance the tether keeps from obstacles when sliced or checked.
    pub clearance_tether: f64,
    pub l_max: f64,
    pub goal_tolerance: f64,
    pub dp_mode: DpMode,
    pub rng_seed: u64,
    /// Largest height change between adjacent UGV cells.
    pub max_step: f64,
    /// Fraction of samples that put the UAV at the goal.
    pub goal_bias: f64,
    /// Length increment of the numeric catenary baseline.
    pub cdp_dl: f64,
    /// Point samples per curve in the numeric catenary baseline.
    pub cdp_samples: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            batch: 500,
            max_iters: 10_000,
            step_ugv: 1.0,
            step_uav: 1.0,
            neighbor_radius: 2.5,
            clearance_ugv: 0.3,
            clearance_uav: 0.3,
            clearance_tether: 0.1,
            l_max: 10.0,
            goal_tolerance: 0.5,
            dp_mode: DpMode::Pdp,
            rng_seed: 0,
            max_step: 0.3,
            goal_bias: 0.05,
            cdp_dl: 0.1,
            cdp_samples: 50,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.step_ugv,
            self.step_uav,
            self.neighbor_radius,
            self.clearance_ugv,
            self.clearance_uav,
            self.l_max,
            self.goal_tolerance,
            self.cdp_dl,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) || self.batch == 0 || self.max_iters == 0 {
            return Err(Error::InvalidInput("planner parameters must be positive".into()));
        }
        if self.batch > self.max_iters {
            return Err(Error::InvalidInput("batch exceeds max_iters".into()));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) || self.clearance_tether < 0.0 || self.max_step < 0.0 {
            return Err(Error::InvalidInput("goal_bias, clearance_tether or max_step out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarsupialConfig {
    pub p_g: Vec3,
    pub p_a: Vec3,
    pub tether_length: Option<f64>,
    /// Whether validation needed a decision problem (no line of sight).
    #[serde(default)]
    pub dp_used: bool,
}

impl MarsupialConfig {
    pub fn new(p_g: Vec3, p_a: Vec3) -> Self {
        Self { p_g, p_a, tether_length: None, dp_used: false }
    }

    /// Summed UGV + UAV Euclidean distance.
    pub fn distance(&self, other: &MarsupialConfig) -> f64 {
        (self.p_g - other.p_g).norm() + (self.p_a - other.p_a).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub config: MarsupialConfig,
    pub parent: Option<usize>,
    pub cost: f64,
}

/// Grid plus the UGV standing cells extracted for the planner clearances.
#[derive(Debug, Clone)]
pub struct PlanningEnv {
    pub grid: EdfGrid,
    pub ground: GroundMap,
}

impl PlanningEnv {
    pub fn new(grid: EdfGrid, params: &PlannerParams) -> Self {
        let ground = traversable_ground(&grid, params.clearance_ugv, params.max_step);
        Self { grid, ground }
    }

    pub fn ugv_clear(&self, p: Vec3, params: &PlannerParams) -> bool {
        self.grid.is_clear_of_obstacles(p, params.clearance_ugv).unwrap_or(false)
    }

    pub fn uav_clear(&self, p: Vec3, params: &PlannerParams) -> bool {
        self.grid.is_clear(p, params.clearance_uav).unwrap_or(false)
    }
}

/// Counters kept across validations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationStats {
    pub calls: usize,
    pub dp_calls: usize,
    pub dp_found: usize,
    pub dp_time_s: f64,
}

impl ValidationStats {
    pub fn dp_rate(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.dp_calls as f64 / self.calls as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub iterations: usize,
    pub nodes: usize,
    pub dp_rate: f64,
    pub validations: ValidationStats,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathNode {
    pub p_g: Vec3,
    pub p_a: Vec3,
    pub tether_length: f64,
    pub dp_used: bool,
}

/// Path file contents: the configurations root to goal plus run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub nodes: Vec<PathNode>,
    pub cost: f64,
    pub stats: PlanStats,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub path: Option<PlannedPath>,
    pub tree: Vec<PlanNode>,
    pub stats: PlanStats,
}

/// Uniform UGV position over the standing cells and UAV position over the
/// free volume, each by rejection against its clearance.
pub fn sample<R: Rng>(
    rng: &mut R,
    params: &PlannerParams,
    env: &PlanningEnv,
    goal_uav: Option<Vec3>,
) -> Result<MarsupialConfig> {
    if env.ground.is_empty() {
        return Err(Error::SamplingExhausted(0));
    }
    let mut p_g = None;
    for _ in 0..SAMPLE_ATTEMPTS {
        let p = env.ground.points[rng.gen_range(0..env.ground.len())];
        if env.ugv_clear(p, params) {
            p_g = Some(p);
            break;
        }
    }
    let p_g = p_g.ok_or(Error::SamplingExhausted(SAMPLE_ATTEMPTS))?;
    if let Some(goal) = goal_uav {
        if rng.gen::<f64>() < params.goal_bias {
            return Ok(MarsupialConfig::new(p_g, goal));
        }
    }
    let (lo, hi) = env.grid.bounds();
    for _ in 0..SAMPLE_ATTEMPTS {
        let p = Vec3::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z));
        if env.uav_clear(p, params) {
            return Ok(MarsupialConfig::new(p_g, p));
        }
    }
    Err(Error::SamplingExhausted(SAMPLE_ATTEMPTS))
}

fn towards(from: Vec3, to: Vec3, step: f64) -> Vec3 {
    let d = to - from;
    let n = d.norm();
    if n <= step {
        to
    } else {
        from + d * (step / n)
    }
}

/// Attaches a tether length to a configuration whose two positions are
/// individually clear, or returns `None` when no tether fits.
pub fn validate_node(
    config: &MarsupialConfig,
    params: &PlannerParams,
    env: &PlanningEnv,
    stats: &mut ValidationStats,
) -> Option<MarsupialConfig> {
    stats.calls += 1;
    let (g, a) = (config.p_g, config.p_a);
    let chord = (a - g).norm();
    if chord > params.l_max {
        return None;
    }
    if env.grid.segment_clear(g, a, params.clearance_tether) {
        return Some(MarsupialConfig { tether_length: Some(chord), dp_used: false, ..*config });
    }
    stats.dp_calls += 1;
    let t0 = Instant::now();
    let out = (|| {
        let slice = slice_plane(&env.grid, g, a, params.clearance_tether).ok()?;
        let obstacles: Vec<Obstacle2D> = slice.clusters.into_iter().map(|c| c.hull).collect();
        let res = match params.dp_mode {
            DpMode::Pdp => solve_pdp(slice.a, slice.b, &obstacles, params.l_max, slice.ground_y),
            DpMode::Cdp => solve_cdp_numeric(
                slice.a,
                slice.b,
                &obstacles,
                params.l_max,
                params.cdp_dl,
                params.cdp_samples,
                slice.ground_y,
            ),
        };
        res.length.filter(|_| res.is_found())
    })();
    stats.dp_time_s += t0.elapsed().as_secs_f64();
    let length = out?;
    stats.dp_found += 1;
    Some(MarsupialConfig { tether_length: Some(length), dp_used: true, ..*config })
}

/// Tries UAV-only, joint and UGV-only moves towards `rand`, returning the
/// first that passes clearance and validation.
pub fn steer(
    near: &MarsupialConfig,
    rand: &MarsupialConfig,
    params: &PlannerParams,
    env: &PlanningEnv,
    stats: &mut ValidationStats,
) -> Option<MarsupialConfig> {
    let moved_g = || {
        let target = towards(near.p_g, rand.p_g, params.step_ugv);
        env.ground.snap(&env.grid, target, near.p_g.z)
    };
    let moved_a = towards(near.p_a, rand.p_a, params.step_uav);
    for mode in 0..3 {
        let (p_g, p_a) = match mode {
            0 => (Some(near.p_g), moved_a),
            1 => (moved_g(), moved_a),
            _ => (moved_g(), near.p_a),
        };
        let Some(p_g) = p_g else { continue };
        if (p_g - near.p_g).norm() + (p_a - near.p_a).norm() < 1e-9 {
            continue;
        }
        if !env.ugv_clear(p_g, params) || !env.uav_clear(p_a, params) {
            continue;
        }
        if let Some(c) = validate_node(&MarsupialConfig::new(p_g, p_a), params, env, stats) {
            return Some(c);
        }
    }
    None
}

/// Validates the configuration halfway along an edge.
pub fn edge_valid(
    from: &MarsupialConfig,
    to: &MarsupialConfig,
    params: &PlannerParams,
    env: &PlanningEnv,
    stats: &mut ValidationStats,
) -> bool {
    let mid_g = (from.p_g + to.p_g) * 0.5;
    let Some(p_g) = env.ground.snap(&env.grid, mid_g, mid_g.z) else {
        return false;
    };
    let p_a = (from.p_a + to.p_a) * 0.5;
    env.ugv_clear(p_g, params)
        && env.uav_clear(p_a, params)
        && validate_node(&MarsupialConfig::new(p_g, p_a), params, env, stats).is_some()
}

struct Tree {
    nodes: Vec<PlanNode>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn push(&mut self, node: PlanNode) -> usize {
        if let Some(p) = node.parent {
            self.children[p].push(self.nodes.len());
        }
        self.nodes.push(node);
        self.children.push(Vec::new());
        self.nodes.len() - 1
    }

    fn reparent(&mut self, id: usize, parent: usize, cost: f64) {
        if let Some(old) = self.nodes[id].parent {
            self.children[old].retain(|&c| c != id);
        }
        self.children[parent].push(id);
        self.nodes[id].parent = Some(parent);
        let delta = cost - self.nodes[id].cost;
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            self.nodes[n].cost += delta;
            stack.extend(self.children[n].iter().copied());
        }
    }

    fn path_to(&self, mut id: usize) -> Vec<MarsupialConfig> {
        let mut out = vec![self.nodes[id].config];
        while let Some(p) = self.nodes[id].parent {
            out.push(self.nodes[p].config);
            id = p;
        }
        out.reverse();
        out
    }

    fn best_goal(&self, goal: Vec3, tol: f64) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| (n.config.p_a - goal).norm() <= tol)
            .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
            .map(|(i, _)| i)
    }
}

fn to_path(configs: Vec<MarsupialConfig>, cost: f64, stats: PlanStats) -> PlannedPath {
    let nodes = configs
        .into_iter()
        .map(|c| PathNode {
            p_g: c.p_g,
            p_a: c.p_a,
            tether_length: c.tether_length.unwrap_or_else(|| (c.p_a - c.p_g).norm()),
            dp_used: c.dp_used,
        })
        .collect();
    PlannedPath { nodes, cost, stats }
}

/// Batched RRT*: after every `batch` iterations the cheapest node within
/// `goal_tolerance` of the UAV goal ends the search.
pub fn plan(start: &MarsupialConfig, goal_uav: Vec3, params: &PlannerParams, env: &PlanningEnv) -> Result<PlanOutcome> {
    params.validate()?;
    let clock = Instant::now();
    let mut vstats = ValidationStats::default();
    let root = match start.tether_length {
        Some(_) => *start,
        None => validate_node(start, params, env, &mut vstats)
            .ok_or_else(|| Error::InvalidInput("start configuration has no feasible tether".into()))?,
    };
    let mut tree = Tree { nodes: Vec::new(), children: Vec::new() };
    tree.push(PlanNode { config: root, parent: None, cost: 0.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut iterations = 0;

    let finish = |tree: Tree, iterations: usize, vstats: ValidationStats, found: Option<usize>| {
        let stats = PlanStats {
            iterations,
            nodes: tree.nodes.len(),
            dp_rate: vstats.dp_rate(),
            validations: vstats,
            wall_time_s: clock.elapsed().as_secs_f64(),
        };
        let path = found.map(|id| to_path(tree.path_to(id), tree.nodes[id].cost, stats));
        PlanOutcome { path, tree: tree.nodes, stats }
    };

    if let Some(id) = tree.best_goal(goal_uav, params.goal_tolerance) {
        return Ok(finish(tree, 0, vstats, Some(id)));
    }

    while iterations < params.max_iters {
        iterations += 1;
        if let Ok(rand) = sample(&mut rng, params, env, Some(goal_uav)) {
            extend(&mut tree, &rand, params, env, &mut vstats);
        }
        if iterations % params.batch == 0 || iterations == params.max_iters {
            if let Some(id) = tree.best_goal(goal_uav, params.goal_tolerance) {
                return Ok(finish(tree, iterations, vstats, Some(id)));
            }
        }
    }
    Ok(finish(tree, iterations, vstats, None))
}

fn extend(tree: &mut Tree, rand: &MarsupialConfig, params: &PlannerParams, env: &PlanningEnv, vstats: &mut ValidationStats) {
    let nearest = tree
        .nodes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.config.distance(rand).total_cmp(&b.1.config.distance(rand)))
        .map(|(i, _)| i)
        .expect("tree has a root");
    let Some(new) = steer(&tree.nodes[nearest].config, rand, params, env, vstats) else {
        return;
    };
    let neighbors: Vec<usize> = tree
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| *i != nearest && n.config.distance(&new) <= params.neighbor_radius)
        .map(|(i, _)| i)
        .collect();

    // cheapest parent first; the first edge that validates wins
    let mut candidates: Vec<(f64, usize)> = std::iter::once(nearest)
        .chain(neighbors.iter().copied())
        .map(|i| (tree.nodes[i].cost + tree.nodes[i].config.distance(&new), i))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some(&(cost, parent)) = candidates
        .iter()
        .find(|&&(_, i)| edge_valid(&tree.nodes[i].config, &new, params, env, vstats))
    else {
        return;
    };
    let id = tree.push(PlanNode { config: new, parent: Some(parent), cost });

    for &n in &neighbors {
        if n == parent {
            continue;
        }
        let c = cost + new.distance(&tree.nodes[n].config);
        if c < tree.nodes[n].cost - 1e-12 && edge_valid(&new, &tree.nodes[n].config, params, env, vstats) {
            tree.reparent(n, id, c);
        }
    }
}
