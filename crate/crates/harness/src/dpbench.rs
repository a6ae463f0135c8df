//! Random 2D decision-problem scenes and the parabola-vs-numeric-catenary
//! timing benchmark.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tether_core::decision::{
    clip_for_decision, solve_cdp_numeric, solve_pdp, DecisionStatus, Obstacle2D, TrapezoidT,
};
use tether_core::curves::TetherCurve;
use tether_core::Point2;

use crate::config::DpSceneParams;
use crate::stats::{summarize, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct DpScene {
    pub a: Point2,
    pub b: Point2,
    pub ground_y: f64,
    pub max_length: f64,
    /// Obstacles as generated.
    pub raw: Vec<Obstacle2D>,
    /// Obstacles clipped to the region under the chord.
    pub clipped: Vec<Obstacle2D>,
}

fn chord_at(a: Point2, b: Point2, x: f64) -> f64 {
    a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)
}

fn clear_of_endpoints(o: &Obstacle2D, a: Point2, b: Point2) -> bool {
    let near = |p: Point2| {
        o.contains(p) || tether_core::geometry::point_polygon_boundary_distance(p, &o.vertices) < 0.05
    };
    !near(a) && !near(b)
}

/// Boxes and triangles placed around the chord, so most of them interact
/// with it. Nothing covers either suspension point.
pub fn gen_dp_scene<R: Rng>(rng: &mut R, p: &DpSceneParams) -> DpScene {
    let span = rng.gen_range(p.min_span..=p.max_span);
    let a = Point2::new(0.0, rng.gen_range(1.0..=6.0));
    let b = Point2::new(span, rng.gen_range(1.0..=6.0));
    let ground_y = 0.0;
    let chord = a.distance(b);
    let max_length = chord * rng.gen_range(p.min_slack..=p.max_slack);
    let boxes = rng.gen_range(p.min_boxes..=p.max_boxes);
    let triangles = rng.gen_range(0..=p.max_triangles);
    let mut raw = Vec::new();
    let mut attempts = 0;
    while raw.len() < boxes + triangles && attempts < 1000 {
        attempts += 1;
        let cx = rng.gen_range(0.1..0.9) * span;
        let top = chord_at(a, b, cx);
        let cy = rng.gen_range(0.3..top + 0.5);
        let o = if raw.len() < boxes {
            let w = rng.gen_range(0.2..=(0.2 * span).max(0.3));
            let h = rng.gen_range(0.2..=2.5);
            Obstacle2D::rect(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
        } else {
            let r = rng.gen_range(0.2..=1.5);
            let pts: Vec<Point2> = (0..3)
                .map(|k| {
                    let th = rng.gen_range(0.0..std::f64::consts::TAU / 3.0) + k as f64 * std::f64::consts::TAU / 3.0;
                    Point2::new(cx + r * th.cos(), cy + r * th.sin())
                })
                .collect();
            match Obstacle2D::new(pts) {
                Ok(t) => t.hull(),
                Err(_) => continue,
            }
        };
        if clear_of_endpoints(&o, a, b) {
            raw.push(o);
        }
    }
    let clipped = clip_for_decision(&raw, &TrapezoidT::new(a, b, ground_y));
    DpScene { a, b, ground_y, max_length, raw, clipped }
}

pub fn gen_dp_scenes(n: usize, seed: u64, p: &DpSceneParams) -> Vec<DpScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| gen_dp_scene(&mut rng, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpRow {
    pub scene: usize,
    pub obstacles: usize,
    pub chord: f64,
    pub max_length: f64,
    pub pdp_status: &'static str,
    pub pdp_length: f64,
    pub pdp_iterations: usize,
    pub pdp_taut: bool,
    pub cdp_status: &'static str,
    pub cdp_length: f64,
    pub cdp_iterations: usize,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpTiming {
    pub scene: usize,
    pub pdp_time_ns: u128,
    pub cdp_time_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DpMethodSummary {
    pub method: &'static str,
    pub found: usize,
    pub count: usize,
    pub mean_s: f64,
    pub std_s: f64,
    pub min_s: f64,
    pub q1_s: f64,
    pub median_s: f64,
    pub q3_s: f64,
    pub max_s: f64,
}

impl DpMethodSummary {
    fn new(method: &'static str, found: usize, t: Summary) -> Self {
        Self {
            method,
            found,
            count: t.count,
            mean_s: t.mean,
            std_s: t.std,
            min_s: t.min,
            q1_s: t.q1,
            median_s: t.median,
            q3_s: t.q3,
            max_s: t.max,
        }
    }
}

fn tag(s: DecisionStatus) -> &'static str {
    match s {
        DecisionStatus::Found => "found",
        DecisionStatus::NoSolution => "no_solution",
    }
}

pub fn run_dp_benchmark(scenes: &[DpScene], dl: f64, samples: usize) -> (Vec<DpRow>, Vec<DpTiming>) {
    let mut rows = Vec::with_capacity(scenes.len());
    let mut timings = Vec::with_capacity(scenes.len());
    for (k, s) in scenes.iter().enumerate() {
        let t0 = Instant::now();
        let pdp = solve_pdp(s.a, s.b, &s.clipped, s.max_length, s.ground_y);
        let pdp_time_ns = t0.elapsed().as_nanos();
        let t0 = Instant::now();
        let cdp = solve_cdp_numeric(s.a, s.b, &s.clipped, s.max_length, dl, samples, s.ground_y);
        let cdp_time_ns = t0.elapsed().as_nanos();
        rows.push(DpRow {
            scene: k,
            obstacles: s.clipped.len(),
            chord: s.a.distance(s.b),
            max_length: s.max_length,
            pdp_status: tag(pdp.status),
            pdp_length: pdp.length.unwrap_or(f64::NAN),
            pdp_iterations: pdp.iterations,
            pdp_taut: matches!(pdp.curve, Some(TetherCurve::Taut)),
            cdp_status: tag(cdp.status),
            cdp_length: cdp.length.unwrap_or(f64::NAN),
            cdp_iterations: cdp.iterations,
            agree: pdp.status == cdp.status,
        });
        timings.push(DpTiming { scene: k, pdp_time_ns, cdp_time_ns });
    }
    (rows, timings)
}

pub fn summarize_dp(rows: &[DpRow], timings: &[DpTiming]) -> Vec<DpMethodSummary> {
    let pdp: Vec<f64> = timings.iter().map(|t| t.pdp_time_ns as f64 * 1e-9).collect();
    let cdp: Vec<f64> = timings.iter().map(|t| t.cdp_time_ns as f64 * 1e-9).collect();
    vec![
        DpMethodSummary::new("pdp", rows.iter().filter(|r| r.pdp_status == "found").count(), summarize(&pdp)),
        DpMethodSummary::new(
            "cdp_numeric",
            rows.iter().filter(|r| r.cdp_status == "found").count(),
            summarize(&cdp),
        ),
    ]
}

/// Status disagreements split by cause.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Disagreements {
    pub scenes: usize,
    /// PDP accepts the straight chord, which CDP never tries.
    pub taut: usize,
    /// PDP finds a sagging parabola but CDP finds no catenary.
    pub band_skip: usize,
    /// Only a catenary fits.
    pub cdp_only: usize,
}

impl Disagreements {
    pub fn band_skip_rate(&self) -> f64 {
        if self.scenes == 0 {
            0.0
        } else {
            self.band_skip as f64 / self.scenes as f64
        }
    }
}

pub fn disagreements(rows: &[DpRow]) -> Disagreements {
    let mut d = Disagreements { scenes: rows.len(), taut: 0, band_skip: 0, cdp_only: 0 };
    for r in rows.iter().filter(|r| !r.agree) {
        if r.pdp_status == "found" {
            if r.pdp_taut {
                d.taut += 1;
            } else {
                d.band_skip += 1;
            }
        } else {
            d.cdp_only += 1;
        }
    }
    d
}

pub fn agreement(rows: &[DpRow]) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    rows.iter().filter(|r| r.agree).count() as f64 / rows.len() as f64
}
