//! Joint trajectory optimisation of UGV, UAV and tether.
//!
//! Each state carries both vehicle positions, the tether curve parameters in
//! the vertical plane through them and the time step from the previous
//! state. The objective is a weighted sum of squared residuals minimised by
//! Levenberg-Marquardt with a central-difference Jacobian. Residuals only
//! couple neighbouring states, so each Jacobian column is built from three
//! residual blocks.
//!
//! The residuals inherited from the platform planner are reconstructions:
//! equidistance and velocity/acceleration use squared deviations from their
//! targets, clearance, traversability and smoothness use hinges.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curves::{
    catenary_from_length, fit_catenary_bisection, max_vertical_gap, CatenaryParams, ParabolaParams, PlaneFrame,
    TetherCurve, TAUT_TOLERANCE,
};
use crate::environment::EdfGrid;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Vec3};
use crate::planner::{PathNode, PlanningEnv};

/// Tether samples per state for the clearance residuals.
pub const DEFAULT_TETHER_SAMPLES: usize = 20;

/// Spans below this are treated as a vertical tether.
const MIN_SPAN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Parabola,
    Catenary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarsupialState {
    pub p_g: Vec3,
    pub p_a: Vec3,
    pub tether: TetherCurve,
    pub dt: f64,
}

impl MarsupialState {
    pub fn frame(&self) -> PlaneFrame {
        PlaneFrame::through(self.p_g, self.p_a)
    }

    /// Suspension points in the state's plane frame.
    pub fn suspension(&self) -> (Point2, Point2) {
        let f = self.frame();
        (f.map_to_2d(self.p_g), f.map_to_2d(self.p_a))
    }

    pub fn chord(&self) -> f64 {
        (self.p_a - self.p_g).norm()
    }

    pub fn length(&self) -> f64 {
        let (a, b) = self.suspension();
        if b.x - a.x < MIN_SPAN {
            return self.chord();
        }
        self.tether.length(a, b)
    }

    /// `m` world-space points along the tether.
    pub fn tether_points(&self, m: usize) -> Vec<Vec3> {
        let f = self.frame();
        let (a, b) = self.suspension();
        let m = m.max(2);
        if b.x - a.x < MIN_SPAN {
            return (0..m).map(|j| self.p_g + (self.p_a - self.p_g) * (j as f64 / (m - 1) as f64)).collect();
        }
        self.tether.sample(a, b, m).into_iter().map(|q| f.map_to_3d(q)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<MarsupialState>,
    pub tether_samples_m: usize,
    pub mode: CurveMode,
    /// Target spacing between consecutive UGV / UAV states.
    pub rho_eg: f64,
    pub rho_ea: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i > 0 {
                    t += s.dt;
                }
                t
            })
            .collect()
    }

    pub fn to_file(&self) -> TrajectoryFile {
        let states = self
            .states
            .iter()
            .zip(self.times())
            .map(|(s, t)| StateRecord { t, p_g: s.p_g, p_a: s.p_a, curve: s.tether, length: s.length() })
            .collect();
        TrajectoryFile { mode: self.mode, tether_samples_m: self.tether_samples_m, states }
    }

    pub fn from_file(file: &TrajectoryFile) -> Result<Self> {
        if file.states.len() < 2 {
            return Err(Error::InvalidInput("trajectory needs at least two states".into()));
        }
        let mut prev_t = 0.0;
        let states: Vec<MarsupialState> = file
            .states
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let dt = if i == 0 { 0.0 } else { r.t - prev_t };
                prev_t = r.t;
                MarsupialState { p_g: r.p_g, p_a: r.p_a, tether: r.curve, dt }
            })
            .collect();
        let (rho_eg, rho_ea) = mean_spacing(&states);
        Ok(Self { states, tether_samples_m: file.tether_samples_m, mode: file.mode, rho_eg, rho_ea })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub t: f64,
    pub p_g: Vec3,
    pub p_a: Vec3,
    pub curve: TetherCurve,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub mode: CurveMode,
    pub tether_samples_m: usize,
    pub states: Vec<StateRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub g_eg: f64,
    pub g_og: f64,
    pub g_trav: f64,
    pub g_sg: f64,
    pub g_vg: f64,
    pub g_ag: f64,
    pub g_ea: f64,
    pub g_oa: f64,
    pub g_sa: f64,
    pub g_va: f64,
    pub g_aa: f64,
    pub g_ot: f64,
    pub g_u: f64,
    pub g_p: f64,
    pub rho_og: f64,
    pub rho_oa: f64,
    pub rho_ot: f64,
    pub rho_trav: f64,
    pub rho_sg: f64,
    pub rho_sa: f64,
    pub rho_vg: f64,
    pub rho_va: f64,
    pub rho_ag: f64,
    pub rho_aa: f64,
    /// Extra scale on the tether clearance hinge.
    pub beta: f64,
    /// Hinges on platform clearance start this far above the threshold so the
    /// optimum sits strictly inside the feasible set.
    pub platform_margin: f64,
    pub tether_margin: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            g_eg: 0.2,
            g_og: 0.08,
            g_trav: 0.5,
            g_sg: 0.12,
            g_vg: 0.05,
            g_ag: 0.005,
            g_ea: 0.25,
            g_oa: 0.08,
            g_sa: 0.14,
            g_va: 0.05,
            g_aa: 0.005,
            g_ot: 0.25,
            g_u: 0.1,
            g_p: 0.1,
            rho_og: 1.2,
            rho_oa: 1.2,
            rho_ot: 0.1,
            rho_trav: 0.001,
            rho_sg: std::f64::consts::PI / 9.0,
            rho_sa: std::f64::consts::PI / 9.0,
            rho_vg: 1.0,
            rho_va: 1.0,
            rho_ag: 0.0,
            rho_aa: 0.0,
            beta: 10.0,
            platform_margin: 0.5,
            tether_margin: 0.05,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let gammas = [
            self.g_eg, self.g_og, self.g_trav, self.g_sg, self.g_vg, self.g_ag, self.g_ea, self.g_oa, self.g_sa,
            self.g_va, self.g_aa, self.g_ot, self.g_u, self.g_p,
        ];
        if gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidInput("weights must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Tether length penalty: grows once the length nears the chord or the
/// maximum length.
pub fn residual_length(state: &MarsupialState, l_max: f64) -> f64 {
    let d = state.chord();
    let l = state.length();
    (d - l).exp() + (l - l_max).exp()
}

/// Parabola height minus suspension height at both ends.
pub fn residual_parabola_endpoints(par: &ParabolaParams, a: Point2, b: Point2) -> (f64, f64) {
    (par.eval(a.x) - a.y, par.eval(b.x) - b.y)
}

pub fn residual_catenary_endpoints(cat: &CatenaryParams, a: Point2, b: Point2) -> (f64, f64) {
    (cat.eval(a.x) - a.y, cat.eval(b.x) - b.y)
}

fn endpoint_residuals(state: &MarsupialState) -> (f64, f64) {
    let (a, b) = state.suspension();
    if b.x - a.x < MIN_SPAN {
        return (0.0, 0.0);
    }
    match &state.tether {
        TetherCurve::Parabola(p) => residual_parabola_endpoints(p, a, b),
        TetherCurve::Catenary(c) => residual_catenary_endpoints(c, a, b),
        TetherCurve::Taut => (0.0, 0.0),
    }
}

/// Distance field value that keeps falling outside the grid.
fn field_distance(grid: &EdfGrid, p: Vec3, obstacles_only: bool) -> f64 {
    let (lo, hi) = grid.bounds();
    let q = Vec3::new(p.x.clamp(lo.x, hi.x), p.y.clamp(lo.y, hi.y), p.z.clamp(lo.z, hi.z));
    let d = if obstacles_only { grid.obstacle_distance_at(q) } else { grid.distance_at(q) };
    d.unwrap_or(0.0) - (p - q).norm()
}

fn ground_offset(env: &PlanningEnv, p: Vec3) -> f64 {
    match env.ground.snap(&env.grid, p, p.z) {
        Some(g) => (p.z - g.z).abs(),
        None => env
            .ground
            .points
            .iter()
            .map(|g| (p - g).norm())
            .fold(f64::INFINITY, f64::min)
            .min(1e3),
    }
}

/// Segment length below which near-stationary motion is smoothed out.
const STILL: f64 = 1e-3;

/// Norm with the kink at zero rounded off inside `STILL`, so standing still
/// stays differentiable.
fn soft_norm(v: Vec3) -> f64 {
    let n = v.norm();
    if n >= STILL {
        n
    } else {
        0.5 * (n * n / STILL + STILL)
    }
}

/// Segment length over which the turn angle fades in.
const TURN_FADE: f64 = 0.1;

/// Turn angle at `b`, faded out as either segment shrinks to zero where the
/// direction is undefined.
fn turn_angle(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let (u, v) = (b - a, c - b);
    let (nu, nv) = (u.norm(), v.norm());
    if nu < 1e-12 || nv < 1e-12 {
        return 0.0;
    }
    let angle = (u.dot(&v) / (nu * nv)).clamp(-1.0, 1.0).acos();
    let fade = |n: f64| n * n / (n * n + TURN_FADE * TURN_FADE);
    angle * fade(nu) * fade(nv)
}

/// Everything the residuals need besides the trajectory itself.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub env: &'a PlanningEnv,
    pub weights: &'a Weights,
    pub l_max: f64,
}

/// Residual count per state block.
pub fn block_len(m: usize) -> usize {
    11 + m + 3
}

/// Unweighted residual families of one block, in block order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerms {
    pub eg: f64,
    pub og: f64,
    pub trav: f64,
    pub sg: f64,
    pub vg: f64,
    pub ag: f64,
    pub ea: f64,
    pub oa: f64,
    pub sa: f64,
    pub va: f64,
    pub aa: f64,
    pub ot: Vec<f64>,
    pub up: f64,
    pub pa: f64,
    pub pb: f64,
}

fn speeds(states: &[MarsupialState], i: usize) -> (f64, f64) {
    let (s0, s1) = (&states[i - 1], &states[i]);
    let dt = s1.dt;
    (soft_norm(s1.p_g - s0.p_g) / dt, soft_norm(s1.p_a - s0.p_a) / dt)
}

/// Raw residual values of block `i` (states `i - 1 ..= i + 1` involved).
pub fn block_terms(states: &[MarsupialState], i: usize, traj: &Trajectory, prob: &Problem) -> BlockTerms {
    let w = prob.weights;
    let n = states.len();
    let s = &states[i];
    let grid = &prob.env.grid;
    let interior = i >= 1 && i + 1 < n;

    let (eg, ea, vg, va) = if i >= 1 {
        let (v_g, v_a) = speeds(states, i);
        (
            soft_norm(s.p_g - states[i - 1].p_g) - traj.rho_eg,
            soft_norm(s.p_a - states[i - 1].p_a) - traj.rho_ea,
            v_g - w.rho_vg,
            v_a - w.rho_va,
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let (sg, sa, ag, aa) = if interior {
        let (p, nx) = (&states[i - 1], &states[i + 1]);
        let (vg0, va0) = speeds(states, i);
        let (vg1, va1) = speeds(states, i + 1);
        let mean_dt = 0.5 * (s.dt + nx.dt);
        (
            (turn_angle(p.p_g, s.p_g, nx.p_g) - w.rho_sg).max(0.0),
            (turn_angle(p.p_a, s.p_a, nx.p_a) - w.rho_sa).max(0.0),
            (vg1 - vg0) / mean_dt - w.rho_ag,
            (va1 - va0) / mean_dt - w.rho_aa,
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    let og = (w.rho_og + w.platform_margin - field_distance(grid, s.p_g, true)).max(0.0);
    let oa = (w.rho_oa + w.platform_margin - field_distance(grid, s.p_a, false)).max(0.0);
    let trav = (ground_offset(prob.env, s.p_g) - w.rho_trav).max(0.0);
    let ot = s
        .tether_points(traj.tether_samples_m)
        .into_iter()
        .map(|p| w.beta * (w.rho_ot + w.tether_margin - field_distance(grid, p, false)).max(0.0))
        .collect();
    let up = residual_length(s, prob.l_max);
    let (pa, pb) = endpoint_residuals(s);
    BlockTerms { eg, og, trav, sg, vg, ag, ea, oa, sa, va, aa, ot, up, pa, pb }
}

fn write_block(states: &[MarsupialState], i: usize, traj: &Trajectory, prob: &Problem, out: &mut [f64]) {
    let t = block_terms(states, i, traj, prob);
    let w = prob.weights;
    let head = [
        w.g_eg.sqrt() * t.eg,
        w.g_og.sqrt() * t.og,
        w.g_trav.sqrt() * t.trav,
        w.g_sg.sqrt() * t.sg,
        w.g_vg.sqrt() * t.vg,
        w.g_ag.sqrt() * t.ag,
        w.g_ea.sqrt() * t.ea,
        w.g_oa.sqrt() * t.oa,
        w.g_sa.sqrt() * t.sa,
        w.g_va.sqrt() * t.va,
        w.g_aa.sqrt() * t.aa,
    ];
    out[..11].copy_from_slice(&head);
    let m = t.ot.len();
    for (o, v) in out[11..11 + m].iter_mut().zip(&t.ot) {
        *o = w.g_ot.sqrt() * v;
    }
    out[11 + m] = w.g_u.sqrt() * t.up;
    out[12 + m] = w.g_p.sqrt() * t.pa;
    out[13 + m] = w.g_p.sqrt() * t.pb;
}

/// Stacked weighted residuals; the objective is their squared norm.
pub fn residual_suite(traj: &Trajectory, prob: &Problem) -> Vec<f64> {
    let bl = block_len(traj.tether_samples_m);
    let mut out = vec![0.0; bl * traj.states.len()];
    for i in 0..traj.states.len() {
        write_block(&traj.states, i, traj, prob, &mut out[i * bl..(i + 1) * bl]);
    }
    out
}

pub fn cost(traj: &Trajectory, prob: &Problem) -> f64 {
    residual_suite(traj, prob).iter().map(|r| r * r).sum()
}

fn mean_spacing(states: &[MarsupialState]) -> (f64, f64) {
    let n = states.len().max(2) - 1;
    let g: f64 = states.windows(2).map(|w| (w[1].p_g - w[0].p_g).norm()).sum();
    let a: f64 = states.windows(2).map(|w| (w[1].p_a - w[0].p_a).norm()).sum();
    (g / n as f64, a / n as f64)
}

fn taut_like(len: f64, chord: f64) -> bool {
    len <= chord * (1.0 + TAUT_TOLERANCE)
}

/// Initial tether for one path node: the catenary of the planned length,
/// converted to the equal-area parabola in parabola mode.
pub fn initial_curve(p_g: Vec3, p_a: Vec3, length: f64, mode: CurveMode) -> Result<TetherCurve> {
    let f = PlaneFrame::through(p_g, p_a);
    let (a, b) = (f.map_to_2d(p_g), f.map_to_2d(p_a));
    let chord = a.distance(b);
    let vertical = b.x - a.x < MIN_SPAN;
    match mode {
        CurveMode::Parabola => {
            if vertical {
                return Ok(TetherCurve::Parabola(ParabolaParams::new(0.0, 0.0, a.y)));
            }
            if taut_like(length, chord) {
                return Ok(TetherCurve::Parabola(ParabolaParams::chord(a, b)?));
            }
            let cat = catenary_from_length(a, b, length)?;
            let area = cat.area(a.x, b.x);
            Ok(TetherCurve::Parabola(ParabolaParams::from_area(a, b, area)?))
        }
        CurveMode::Catenary => {
            if vertical {
                return Ok(TetherCurve::Taut);
            }
            let l = if taut_like(length, chord) { chord * (1.0 + 1e-4) } else { length };
            Ok(TetherCurve::Catenary(catenary_from_length(a, b, l)?))
        }
    }
}

/// Trajectory seeded from planner output; time steps follow the slower
/// platform at the desired velocity.
pub fn initialize_from_path(path: &[PathNode], mode: CurveMode, weights: &Weights, m: usize) -> Result<Trajectory> {
    if path.len() < 2 {
        return Err(Error::InvalidInput("path needs at least two nodes".into()));
    }
    let mut states = Vec::with_capacity(path.len());
    for (i, node) in path.iter().enumerate() {
        let tether = initial_curve(node.p_g, node.p_a, node.tether_length, mode)?;
        let dt = if i == 0 {
            0.0
        } else {
            let prev = &path[i - 1];
            let tg = (node.p_g - prev.p_g).norm() / weights.rho_vg;
            let ta = (node.p_a - prev.p_a).norm() / weights.rho_va;
            tg.max(ta).max(MIN_DT)
        };
        states.push(MarsupialState { p_g: node.p_g, p_a: node.p_a, tether, dt });
    }
    let (rho_eg, rho_ea) = mean_spacing(&states);
    Ok(Trajectory { states, tether_samples_m: m.max(2), mode, rho_eg, rho_ea })
}

/// Smallest time step the solver allows.
pub const MIN_DT: f64 = 0.05;

/// Smallest catenary parameter the solver allows.
pub const MIN_CATENARY_A: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub fd_step: f64,
    /// Consecutive rejected damping escalations before stopping.
    pub max_rejects: usize,
    pub lambda_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 500, rel_tol: 1e-8, fd_step: 1e-6, max_rejects: 10, lambda_init: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub termination: Termination,
    pub time_s: f64,
}

/// Parameters per state: UGV xyz, UAV xyz, three curve parameters, dt.
pub const STATE_VARS: usize = 10;

fn pack(s: &MarsupialState) -> [f64; STATE_VARS] {
    let t = match s.tether {
        TetherCurve::Parabola(p) => [p.p, p.q, p.r],
        TetherCurve::Catenary(c) => [c.a, c.x0, c.y0],
        TetherCurve::Taut => [0.0, 0.0, 0.0],
    };
    [s.p_g.x, s.p_g.y, s.p_g.z, s.p_a.x, s.p_a.y, s.p_a.z, t[0], t[1], t[2], s.dt]
}

fn set_var(s: &mut MarsupialState, k: usize, v: f64) {
    match k {
        0..=2 => s.p_g[k] = v,
        3..=5 => s.p_a[k - 3] = v,
        6..=8 => match &mut s.tether {
            TetherCurve::Parabola(p) => *[&mut p.p, &mut p.q, &mut p.r][k - 6] = v,
            TetherCurve::Catenary(c) => *[&mut c.a, &mut c.x0, &mut c.y0][k - 6] = v,
            TetherCurve::Taut => {}
        },
        _ => s.dt = v,
    }
}

/// Re-anchors the curve on both suspension points, keeping its shape
/// parameter. The offsets are therefore not free variables.
fn anchor(s: &mut MarsupialState) {
    let (a, b) = s.suspension();
    if b.x - a.x < MIN_SPAN {
        return;
    }
    match &mut s.tether {
        TetherCurve::Parabola(p) => {
            if let Ok(anchored) = ParabolaParams::hanging(a, b, p.p) {
                *p = anchored;
            }
        }
        TetherCurve::Catenary(c) => {
            if let Ok(anchored) = CatenaryParams::through(c.a, a, b) {
                if anchored.y0.is_finite() {
                    *c = anchored;
                }
            }
        }
        TetherCurve::Taut => {}
    }
}

/// Keeps iterates inside the admissible set.
fn project(s: &mut MarsupialState) {
    match &mut s.tether {
        TetherCurve::Parabola(p) => p.p = p.p.max(0.0),
        TetherCurve::Catenary(c) => c.a = c.a.max(MIN_CATENARY_A),
        TetherCurve::Taut => {}
    }
    anchor(s);
}

fn project_all(traj: &mut Trajectory) {
    for (i, s) in traj.states.iter_mut().enumerate() {
        if i > 0 {
            s.dt = s.dt.max(MIN_DT);
        }
        project(s);
    }
}

/// Indices `(state, var)` the solver may move: the start configuration, the
/// goal UAV position and the unused first time step stay fixed. Of the curve
/// only the shape parameter moves, and not at all for a taut vertical tether.
pub fn free_variables(traj: &Trajectory) -> Vec<(usize, usize)> {
    let n = traj.states.len();
    let mut out = Vec::new();
    for (i, s) in traj.states.iter().enumerate() {
        for k in 0..STATE_VARS {
            let pinned = (i == 0 && (k < 6 || k == 9))
                || (i == n - 1 && (3..6).contains(&k))
                || (7..9).contains(&k)
                || (matches!(s.tether, TetherCurve::Taut) && k == 6);
            if !pinned {
                out.push((i, k));
            }
        }
    }
    out
}

/// Central-difference Jacobian of the stacked residuals over the free
/// variables. Each variable only touches the blocks of its state and the
/// two neighbours.
pub fn jacobian(traj: &Trajectory, prob: &Problem, free: &[(usize, usize)], step: f64) -> DMatrix<f64> {
    let bl = block_len(traj.tether_samples_m);
    let n = traj.states.len();
    let mut jac = DMatrix::zeros(bl * n, free.len());
    let mut states = traj.states.clone();
    let mut plus = vec![0.0; bl];
    let mut minus = vec![0.0; bl];
    for (col, &(i, k)) in free.iter().enumerate() {
        let x0 = pack(&states[i])[k];
        let h = step * x0.abs().max(1.0);
        for b in i.saturating_sub(1)..=(i + 1).min(n - 1) {
            set_var(&mut states[i], k, x0 + h);
            anchor(&mut states[i]);
            write_block(&states, b, traj, prob, &mut plus);
            states[i] = traj.states[i];
            set_var(&mut states[i], k, x0 - h);
            anchor(&mut states[i]);
            write_block(&states, b, traj, prob, &mut minus);
            states[i] = traj.states[i];
            for r in 0..bl {
                jac[(b * bl + r, col)] = (plus[r] - minus[r]) / (2.0 * h);
            }
        }
    }
    jac
}

/// `J^T J` and `J^T r` accumulated block by block: block `b` only has
/// nonzero columns for states `b - 1 ..= b + 1`.
fn normal_equations(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    free: &[(usize, usize)],
    n: usize,
    bl: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let nc = free.len();
    let mut first = vec![nc; n + 1];
    for (c, &(i, _)) in free.iter().enumerate().rev() {
        first[i] = c;
    }
    for i in (0..n).rev() {
        first[i] = first[i].min(first[i + 1]);
    }
    let mut jtj = DMatrix::zeros(nc, nc);
    let mut g = DVector::zeros(nc);
    for b in 0..n {
        let lo = first[b.saturating_sub(1)];
        let hi = first[(b + 2).min(n)];
        for row in b * bl..(b + 1) * bl {
            let rv = r[row];
            for c1 in lo..hi {
                let v1 = jac[(row, c1)];
                if v1 == 0.0 {
                    continue;
                }
                g[c1] += v1 * rv;
                for c2 in lo..hi {
                    jtj[(c1, c2)] += v1 * jac[(row, c2)];
                }
            }
        }
    }
    (jtj, g)
}

/// Damped least squares on the stacked residuals. Only cost-decreasing steps
/// are accepted, so the returned trajectory never costs more than the input.
pub fn optimize(traj: &Trajectory, prob: &Problem, cfg: &SolverConfig) -> Result<(Trajectory, OptimizeReport)> {
    let clock = Instant::now();
    let mut cur = traj.clone();
    project_all(&mut cur);
    let free = free_variables(&cur);
    let mut r = DVector::from_vec(residual_suite(&cur, prob));
    let mut c = r.norm_squared();
    if !c.is_finite() {
        return Err(Error::SolverDiverged(format!("initial cost {c}")));
    }
    let initial_cost = c;
    let mut history = vec![c];
    let mut lambda = cfg.lambda_init;
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    while iterations < cfg.max_iters {
        iterations += 1;
        let jac = jacobian(&cur, prob, &free, cfg.fd_step);
        let (jtj, g) = normal_equations(&jac, &r, &free, cur.states.len(), block_len(cur.tether_samples_m));
        let mut accepted = None;
        for _ in 0..cfg.max_rejects {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * (jtj[(d, d)] + 1e-9);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let mut cand = cur.clone();
            for (&(i, k), dx) in free.iter().zip(step.iter()) {
                let x = pack(&cand.states[i])[k];
                set_var(&mut cand.states[i], k, x + dx);
            }
            project_all(&mut cand);
            let rc = DVector::from_vec(residual_suite(&cand, prob));
            let cc = rc.norm_squared();
            if cc.is_finite() && cc < c {
                accepted = Some((cand, rc, cc));
                lambda = (lambda / 3.0).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
        let Some((cand, rc, cc)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let rel = (c - cc) / c.max(1e-300);
        cur = cand;
        r = rc;
        c = cc;
        history.push(c);
        if rel < cfg.rel_tol {
            termination = Termination::Converged;
            break;
        }
    }
    let report = OptimizeReport {
        iterations,
        initial_cost,
        final_cost: c,
        cost_history: history,
        termination,
        time_s: clock.elapsed().as_secs_f64(),
    };
    Ok((cur, report))
}

/// Per-state outcome of turning an optimised parabola into a catenary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub chord: f64,
    pub length: f64,
    /// Largest vertical gap between the parabola and the recovered curve.
    pub max_gap: f64,
    pub taut: bool,
    /// Length nudges needed to clear obstacles, zero if none.
    pub adjustments: usize,
    pub clear: bool,
}

/// Tether clearance of every sample against the full distance field.
pub fn tether_clear(state: &MarsupialState, grid: &EdfGrid, m: usize, rho_ot: f64) -> bool {
    state.tether_points(m).into_iter().all(|p| field_distance(grid, p, false) > rho_ot)
}

/// Replaces each parabola by the bisection-fitted catenary, then nudges the
/// length by 1 % steps (up to 10 each way) if the catenary hits an obstacle.
pub fn recover_catenaries(traj: &Trajectory, grid: &EdfGrid, l_max: f64, rho_ot: f64) -> Result<(Trajectory, Vec<Recovery>)> {
    let mut out = traj.clone();
    out.mode = CurveMode::Catenary;
    let m = traj.tether_samples_m;
    let mut report = Vec::with_capacity(traj.states.len());
    for s in &mut out.states {
        let (a, b) = s.suspension();
        let chord = s.chord();
        let par = match s.tether {
            TetherCurve::Parabola(p) => p,
            TetherCurve::Catenary(_) => {
                let clear = tether_clear(s, grid, m, rho_ot);
                report.push(Recovery { chord, length: s.length(), max_gap: 0.0, taut: false, adjustments: 0, clear });
                continue;
            }
            TetherCurve::Taut => ParabolaParams::new(0.0, 0.0, 0.0),
        };
        let span = b.x - a.x;
        let taut = matches!(s.tether, TetherCurve::Taut)
            || span < MIN_SPAN
            || taut_like(par.length(a.x, b.x), a.distance(b))
            || l_max <= chord * (1.0 + TAUT_TOLERANCE);
        if taut {
            let max_gap = if span < MIN_SPAN {
                0.0
            } else {
                max_vertical_gap(|x| par.eval(x), |x| TetherCurve::Taut.eval(a, b, x), a.x, b.x, 200).1.abs()
            };
            s.tether = TetherCurve::Taut;
            let clear = tether_clear(s, grid, m, rho_ot);
            report.push(Recovery { chord, length: chord, max_gap, taut: true, adjustments: 0, clear });
            continue;
        }
        let fit = fit_catenary_bisection(a, b, &par, l_max, 1e-2)?;
        let max_gap = max_vertical_gap(|x| par.eval(x), |x| fit.catenary.eval(x), a.x, b.x, 200).1.abs();
        s.tether = TetherCurve::Catenary(fit.catenary);
        let mut adjustments = 0;
        let mut clear = tether_clear(s, grid, m, rho_ot);
        let base = fit.length;
        'nudge: for k in 1..=10 {
            if clear {
                break;
            }
            for sign in [1.0, -1.0] {
                let l = base * (1.0 + sign * 0.01 * k as f64);
                if l <= chord * (1.0 + TAUT_TOLERANCE) || l > l_max {
                    continue;
                }
                let Ok(c) = catenary_from_length(a, b, l) else { continue };
                let trial = MarsupialState { tether: TetherCurve::Catenary(c), ..*s };
                if tether_clear(&trial, grid, m, rho_ot) {
                    *s = trial;
                    adjustments = k;
                    clear = true;
                    break 'nudge;
                }
            }
        }
        report.push(Recovery { chord, length: s.length(), max_gap, taut: false, adjustments, clear });
    }
    Ok((out, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub feasible: bool,
    pub min_do_ugv: f64,
    pub min_do_uav: f64,
    pub min_do_tether: f64,
    pub mean_vel_ugv: f64,
    pub max_vel_ugv: f64,
    pub mean_vel_uav: f64,
    pub max_vel_uav: f64,
    pub mean_acc_ugv: f64,
    pub max_acc_ugv: f64,
    pub mean_acc_uav: f64,
    pub max_acc_uav: f64,
    pub opt_time_s: f64,
}

/// Clearances and motion statistics. Feasible means every UGV state is
/// farther than `rho_og` from obstacles, every UAV state farther than
/// `rho_oa` and every tether sample farther than `rho_ot`.
pub fn evaluate(traj: &Trajectory, grid: &EdfGrid, w: &Weights, opt_time_s: f64) -> TrajectoryMetrics {
    let m = traj.tether_samples_m;
    let st = &traj.states;
    let min_do_ugv = st.iter().map(|s| field_distance(grid, s.p_g, true)).fold(f64::INFINITY, f64::min);
    let min_do_uav = st.iter().map(|s| field_distance(grid, s.p_a, false)).fold(f64::INFINITY, f64::min);
    let min_do_tether = st
        .iter()
        .flat_map(|s| s.tether_points(m))
        .map(|p| field_distance(grid, p, false))
        .fold(f64::INFINITY, f64::min);
    let vel: Vec<(f64, f64)> = (1..st.len()).map(|i| speeds(st, i)).collect();
    let acc: Vec<(f64, f64)> = (1..vel.len())
        .map(|k| {
            let mean_dt = 0.5 * (st[k].dt + st[k + 1].dt);
            ((vel[k].0 - vel[k - 1].0).abs() / mean_dt, (vel[k].1 - vel[k - 1].1).abs() / mean_dt)
        })
        .collect();
    let stats = |v: &[(f64, f64)], pick: fn(&(f64, f64)) -> f64| {
        if v.is_empty() {
            return (0.0, 0.0);
        }
        let xs: Vec<f64> = v.iter().map(pick).collect();
        (xs.iter().sum::<f64>() / xs.len() as f64, xs.iter().cloned().fold(0.0, f64::max))
    };
    let (mean_vel_ugv, max_vel_ugv) = stats(&vel, |p| p.0);
    let (mean_vel_uav, max_vel_uav) = stats(&vel, |p| p.1);
    let (mean_acc_ugv, max_acc_ugv) = stats(&acc, |p| p.0);
    let (mean_acc_uav, max_acc_uav) = stats(&acc, |p| p.1);
    TrajectoryMetrics {
        feasible: min_do_ugv > w.rho_og && min_do_uav > w.rho_oa && min_do_tether > w.rho_ot,
        min_do_ugv,
        min_do_uav,
        min_do_tether,
        mean_vel_ugv,
        max_vel_ugv,
        mean_vel_uav,
        max_vel_uav,
        mean_acc_ugv,
        max_acc_ugv,
        mean_acc_uav,
        max_acc_uav,
        opt_time_s,
    }
}
