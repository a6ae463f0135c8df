//! Decision problems: does a collision-free hanging curve of bounded length
//! join two suspension points above a set of 2D polygonal obstacles?
//!
//! [`solve_pdp`] answers it exactly for parabolas by growing the curve
//! through the obstacle vertex that yields the longest parabola, while
//! [`solve_cdp_numeric`] is the sampled catenary baseline. [`solve_cdp_via_pdp`]
//! turns a parabola answer into a catenary, either by inflating obstacles
//! beforehand or by re-checking the fitted catenary afterwards.

use serde::{Deserialize, Serialize};

use crate::curves::{
    catenary_from_length, fit_catenary_bisection, fit_catenary_by_sampling, max_vertical_gap,
    CatenaryParams, ParabolaParams, TetherCurve, TAUT_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::geometry::{
    clip_polygon, convex_hull, convex_hull_indexed, is_convex, point_in_polygon, segment_hits_polygon,
    signed_area, HalfPlane, Point2,
};

/// Slack used by the strict above/below side test against a curve.
pub const SIDE_EPS: f64 = 1e-9;

/// Default inflation as a fraction of the maximum tether length.
pub const DEFAULT_TAU_FRACTION: f64 = 0.035;

/// Chord lift used when clipping obstacles for the decision solvers.
pub const CHORD_LIFT: f64 = 1e-6;

/// Samples per BySampling fit used when converting a parabola answer.
pub const SAMPLING_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle2D {
    pub vertices: Vec<Point2>,
}

impl Obstacle2D {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!("polygon needs 3 vertices, got {}", vertices.len())));
        }
        if signed_area(&vertices).abs() < 1e-14 {
            return Err(Error::InvalidInput("polygon has zero area".into()));
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned box `[x1, x2] x [y1, y2]`.
    pub fn rect(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            vertices: vec![
                Point2::new(x1, y1),
                Point2::new(x2, y1),
                Point2::new(x2, y2),
                Point2::new(x1, y2),
            ],
        }
    }

    pub fn is_convex(&self) -> bool {
        is_convex(&self.vertices)
    }

    /// Counter-clockwise convex hull of the vertices.
    pub fn hull(&self) -> Obstacle2D {
        Obstacle2D { vertices: convex_hull(&self.vertices) }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn contains(&self, p: Point2) -> bool {
        point_in_polygon(p, &self.vertices)
    }
}

/// Open region below the chord `a b`, above `ground_y` and between the
/// verticals through the suspension points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidT {
    pub a: Point2,
    pub b: Point2,
    pub ground_y: f64,
}

impl TrapezoidT {
    pub fn new(a: Point2, b: Point2, ground_y: f64) -> Self {
        let (a, b) = if a.x <= b.x { (a, b) } else { (b, a) };
        Self { a, b, ground_y }
    }

    /// Same region with the chord raised by `lift`. Clipping against it keeps
    /// a sliver of any obstacle that crosses the chord, so the chord still
    /// registers as intersecting that obstacle.
    pub fn lifted(&self, lift: f64) -> Self {
        Self {
            a: Point2::new(self.a.x, self.a.y + lift),
            b: Point2::new(self.b.x, self.b.y + lift),
            ground_y: self.ground_y,
        }
    }

    /// Counter-clockwise corners.
    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.a.x, self.ground_y),
            Point2::new(self.b.x, self.ground_y),
            self.b,
            self.a,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionStatus {
    Found,
    NoSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionResult {
    pub curve: Option<TetherCurve>,
    pub length: Option<f64>,
    pub status: DecisionStatus,
    pub iterations: usize,
}

impl DecisionResult {
    fn found(curve: TetherCurve, length: f64, iterations: usize) -> Self {
        Self { curve: Some(curve), length: Some(length), status: DecisionStatus::Found, iterations }
    }

    fn none(iterations: usize) -> Self {
        Self { curve: None, length: None, status: DecisionStatus::NoSolution, iterations }
    }

    pub fn is_found(&self) -> bool {
        self.status == DecisionStatus::Found
    }
}

/// Intersection of the polygon with the closure of `t`, if non-empty.
pub fn clip_to_trapezoid(obs: &Obstacle2D, t: &TrapezoidT) -> Option<Obstacle2D> {
    let c = t.corners();
    let mut poly = obs.vertices.clone();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    for i in 0..4 {
        if poly.len() < 3 {
            return None;
        }
        poly = clip_polygon(&poly, HalfPlane::left_of(c[i], c[(i + 1) % 4]));
    }
    if poly.len() < 3 || signed_area(&poly).abs() < 1e-12 {
        return None;
    }
    Some(Obstacle2D { vertices: poly })
}

/// Does the parabola cross the polygon on `[x1, x2]`, i.e. do some edge
/// points lie strictly above and others strictly below it?
pub fn parabola_intersects_polygon(par: &ParabolaParams, obs: &Obstacle2D, x1: f64, x2: f64) -> bool {
    let n = obs.vertices.len();
    for i in 0..n {
        let s = obs.vertices[i];
        let e = obs.vertices[(i + 1) % n];
        if edge_crosses(par, s, e, x1, x2) {
            return true;
        }
    }
    false
}

fn edge_crosses(par: &ParabolaParams, s: Point2, e: Point2, x1: f64, x2: f64) -> bool {
    let dx = e.x - s.x;
    let dy = e.y - s.y;
    // restrict the edge to the strip x1 <= x <= x2
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    if dx.abs() < 1e-15 {
        if s.x < x1 || s.x > x2 {
            return false;
        }
    } else {
        let ta = (x1 - s.x) / dx;
        let tb = (x2 - s.x) / dx;
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
        if t0 > t1 {
            return false;
        }
    }
    // g(t) = y(t) - P(x(t)), positive above the curve
    let c2 = -par.p * dx * dx;
    let c1 = dy - par.slope(s.x) * dx;
    let c0 = s.y - par.eval(s.x);
    let g = |t: f64| (c2 * t + c1) * t + c0;
    let (mut lo, mut hi) = {
        let (g0, g1) = (g(t0), g(t1));
        (g0.min(g1), g0.max(g1))
    };
    if c2 != 0.0 {
        let ts = -c1 / (2.0 * c2);
        if ts > t0 && ts < t1 {
            let gs = g(ts);
            lo = lo.min(gs);
            hi = hi.max(gs);
        }
    }
    lo < -SIDE_EPS && hi > SIDE_EPS
}

fn canonical(a: Point2, b: Point2) -> (Point2, Point2) {
    if a.x <= b.x {
        (a, b)
    } else {
        (b, a)
    }
}

/// Length of the parabola through `a`, `b` and `v`: infinite when `v` sits
/// on a vertical through a suspension point, `None` when `v` is above the
/// chord.
pub fn vertex_parabola(a: Point2, b: Point2, v: Point2) -> Option<(f64, Option<ParabolaParams>)> {
    let tol = 1e-12 * (1.0 + a.x.abs().max(b.x.abs()));
    if v.x <= a.x + tol || v.x >= b.x - tol {
        return Some((f64::INFINITY, None));
    }
    match ParabolaParams::through_three_points(a, b, v) {
        Ok(par) => Some((par.length(a.x, b.x), Some(par))),
        Err(Error::NotHanging(_)) => None,
        Err(_) => Some((f64::INFINITY, None)),
    }
}

/// Does the parabola touch the ground on the span?
pub fn touches_ground(par: &ParabolaParams, a: Point2, b: Point2, ground_y: f64) -> bool {
    par.min_over(a.x, b.x) <= ground_y + 1e-9
}

/// Parabola decision problem. Obstacles are convex-hulled first; vertex ties
/// are broken by the lowest index in obstacle-major order.
pub fn solve_pdp(a: Point2, b: Point2, obstacles: &[Obstacle2D], max_length: f64, ground_y: f64) -> DecisionResult {
    let (a, b) = canonical(a, b);
    if b.x - a.x <= 1e-12 {
        return DecisionResult::none(0);
    }
    let hulls: Vec<Obstacle2D> = obstacles.iter().map(Obstacle2D::hull).collect();
    let total_vertices: usize = hulls.iter().map(|h| h.vertices.len()).sum();
    let mut offsets = Vec::with_capacity(hulls.len());
    let mut acc = 0;
    for h in &hulls {
        offsets.push(acc);
        acc += h.vertices.len();
    }

    let mut current = ParabolaParams::chord(a, b).expect("span checked above");
    let mut length = a.distance(b);
    let mut iterations = 0;
    let mut touched: Vec<(usize, Point2)> = Vec::new();
    loop {
        iterations += 1;
        if iterations > total_vertices + 1 {
            return DecisionResult::none(iterations - 1);
        }
        if touches_ground(&current, a, b, ground_y) || length > max_length {
            return DecisionResult::none(iterations);
        }
        touched.clear();
        for (k, h) in hulls.iter().enumerate() {
            if parabola_intersects_polygon(&current, h, a.x, b.x) {
                touched.extend(h.vertices.iter().enumerate().map(|(j, &v)| (offsets[k] + j, v)));
            }
        }
        if touched.is_empty() {
            let curve = if current.p == 0.0 { TetherCurve::Taut } else { TetherCurve::Parabola(current) };
            return DecisionResult::found(curve, length, iterations);
        }
        let pts: Vec<Point2> = touched.iter().map(|&(_, v)| v).collect();
        let mut hull: Vec<(usize, Point2)> =
            convex_hull_indexed(&pts).into_iter().map(|(i, v)| (touched[i].0, v)).collect();
        hull.sort_by_key(|&(i, _)| i);

        let mut best: Option<(f64, Option<ParabolaParams>)> = None;
        for &(_, v) in &hull {
            if let Some((len, par)) = vertex_parabola(a, b, v) {
                if best.as_ref().is_none_or(|(l, _)| len > *l) {
                    best = Some((len, par));
                }
            }
        }
        match best {
            Some((len, Some(par))) if len > length => {
                current = par;
                length = len;
            }
            _ => return DecisionResult::none(iterations),
        }
    }
}

/// Sampled clearance of a curve: every sample above the ground and outside
/// every polygon.
pub fn samples_clear(points: &[Point2], obstacles: &[Obstacle2D], ground_y: f64) -> bool {
    points.iter().all(|&p| p.y > ground_y && obstacles.iter().all(|o| !o.contains(p)))
}

/// Polyline clearance of a curve: consecutive samples joined by segments and
/// tested against every polygon.
pub fn polyline_clear(points: &[Point2], obstacles: &[Obstacle2D], ground_y: f64) -> bool {
    if points.iter().any(|p| p.y <= ground_y) {
        return false;
    }
    points.windows(2).all(|w| obstacles.iter().all(|o| !segment_hits_polygon(w[0], w[1], &o.vertices)))
}

/// Numeric catenary baseline: lengths `d + dl, d + 2 dl, ...` up to
/// `max_length`, each checked at `samples` points.
pub fn solve_cdp_numeric(
    a: Point2,
    b: Point2,
    obstacles: &[Obstacle2D],
    max_length: f64,
    dl: f64,
    samples: usize,
    ground_y: f64,
) -> DecisionResult {
    let (a, b) = canonical(a, b);
    let chord = a.distance(b);
    if max_length < chord || !(dl > 0.0) || b.x - a.x <= 1e-12 {
        return DecisionResult::none(0);
    }
    let samples = samples.max(2);
    let mut iterations = 0;
    let mut k = 1usize;
    loop {
        let l = chord + k as f64 * dl;
        if l > max_length {
            return DecisionResult::none(iterations);
        }
        k += 1;
        iterations += 1;
        let Ok(cat) = catenary_from_length(a, b, l) else {
            continue;
        };
        let curve = TetherCurve::Catenary(cat);
        if samples_clear(&curve.sample(a, b, samples), obstacles, ground_y) {
            return DecisionResult::found(curve, l, iterations);
        }
    }
}

/// Outward offset of each convex polygon by `tau` (mitred corners).
pub fn inflate_obstacles(obstacles: &[Obstacle2D], tau: f64) -> Result<Vec<Obstacle2D>> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!("inflation {tau} must be non-negative")));
    }
    obstacles
        .iter()
        .map(|o| {
            if !o.is_convex() {
                return Err(Error::NonConvexInput);
            }
            if tau == 0.0 {
                return Ok(o.clone());
            }
            let v = convex_hull(&o.vertices);
            let n = v.len();
            // ccw hull: outward normal of edge i is (dy, -dx)
            let lines: Vec<(Point2, f64)> = (0..n)
                .map(|i| {
                    let d = v[(i + 1) % n] - v[i];
                    let nrm = Point2::new(d.y, -d.x) * (1.0 / d.norm());
                    (nrm, nrm.dot(v[i]) + tau)
                })
                .collect();
            let out = (0..n)
                .map(|i| {
                    let (n1, c1) = lines[(i + n - 1) % n];
                    let (n2, c2) = lines[i];
                    let det = n1.cross(n2);
                    Point2::new((c1 * n2.y - c2 * n1.y) / det, (n1.x * c2 - n2.x * c1) / det)
                })
                .collect();
            Ok(Obstacle2D { vertices: out })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CatenaryMode {
    /// Inflate obstacles and ground by `tau` (default `0.035 * L`).
    Inflate { tau: Option<f64> },
    /// Fit on raw obstacles, then re-check and nudge the length.
    Recheck,
}

/// Clips every obstacle to `t` with the chord lifted by [`CHORD_LIFT`].
pub fn clip_for_decision(obstacles: &[Obstacle2D], t: &TrapezoidT) -> Vec<Obstacle2D> {
    let t = t.lifted(CHORD_LIFT);
    obstacles.iter().filter_map(|o| clip_to_trapezoid(o, &t)).collect()
}

fn catenary_length_ok(len: f64, chord: f64, max_length: f64) -> bool {
    len >= chord * (1.0 - 1e-12) && len <= max_length * (1.0 + 1e-12)
}

/// Catenary decision problem answered through the parabola one.
pub fn solve_cdp_via_pdp(
    a: Point2,
    b: Point2,
    obstacles: &[Obstacle2D],
    max_length: f64,
    ground_y: f64,
    mode: CatenaryMode,
) -> DecisionResult {
    let (a, b) = canonical(a, b);
    let chord = a.distance(b);
    match mode {
        CatenaryMode::Inflate { tau } => {
            let tau = tau.unwrap_or(DEFAULT_TAU_FRACTION * max_length);
            let hulls: Vec<Obstacle2D> = obstacles.iter().map(Obstacle2D::hull).filter(|h| h.vertices.len() >= 3).collect();
            let Ok(inflated) = inflate_obstacles(&hulls, tau) else {
                return DecisionResult::none(0);
            };
            let raised = ground_y + tau;
            let clipped = clip_for_decision(&inflated, &TrapezoidT::new(a, b, raised));
            let lo = 1.05 * chord;
            let hi = 0.95 * max_length;
            let pdp = solve_pdp(a, b, &clipped, hi, raised);
            let (Some(curve), Some(mut len)) = (pdp.curve, pdp.length) else {
                return DecisionResult::none(pdp.iterations);
            };
            let mut par = match curve {
                TetherCurve::Parabola(p) => p,
                _ => ParabolaParams::chord(a, b).expect("span is positive when PDP succeeds"),
            };
            if len < lo && lo <= hi {
                if let Ok(longer) = ParabolaParams::with_length(a, b, lo) {
                    let clear = !touches_ground(&longer, a, b, raised)
                        && clipped.iter().all(|o| !parabola_intersects_polygon(&longer, o, a.x, b.x));
                    if clear {
                        par = longer;
                        len = lo;
                    }
                }
            }
            if len <= chord * (1.0 + TAUT_TOLERANCE) {
                return DecisionResult::found(TetherCurve::Taut, chord, pdp.iterations);
            }
            // the inflation only covers fits that stay within tau of the parabola
            let gap_ok = |c: &CatenaryParams| {
                let (_, g) = max_vertical_gap(|x| par.eval(x), |x| c.eval(x), a.x, b.x, 1000);
                g.abs() < 0.95 * tau
                    && c.min_over(a.x, b.x) > ground_y
                    && catenary_length_ok(c.length(a.x, b.x), chord, max_length)
            };
            let mut candidates = Vec::with_capacity(2);
            if let Ok(fit) = fit_catenary_by_sampling(a, b, &par, SAMPLING_FIT_POINTS) {
                candidates.push(fit.catenary);
            }
            if let Ok(fit) = fit_catenary_bisection(a, b, &par, max_length, 1e-2) {
                candidates.push(fit.catenary);
            }
            match candidates.into_iter().find(gap_ok) {
                Some(c) => DecisionResult::found(TetherCurve::Catenary(c), c.length(a.x, b.x), pdp.iterations),
                None => DecisionResult::none(pdp.iterations),
            }
        }
        CatenaryMode::Recheck => {
            let clipped = clip_for_decision(obstacles, &TrapezoidT::new(a, b, ground_y));
            let pdp = solve_pdp(a, b, &clipped, max_length, ground_y);
            let (Some(curve), Some(len)) = (pdp.curve, pdp.length) else {
                return DecisionResult::none(pdp.iterations);
            };
            let par = match curve {
                TetherCurve::Parabola(p) if len > chord * (1.0 + TAUT_TOLERANCE) => p,
                _ => return DecisionResult::found(TetherCurve::Taut, chord, pdp.iterations),
            };
            let clear = |c: &CatenaryParams| {
                let pts = TetherCurve::Catenary(*c).sample(a, b, RECHECK_SAMPLES);
                polyline_clear(&pts, obstacles, ground_y)
            };
            let base = fit_catenary_by_sampling(a, b, &par, SAMPLING_FIT_POINTS)
                .map(|f| f.catenary)
                .or_else(|_| catenary_from_length(a, b, len));
            let Ok(base) = base else {
                return DecisionResult::none(pdp.iterations);
            };
            let base_len = base.length(a.x, b.x);
            if catenary_length_ok(base_len, chord, max_length) && clear(&base) {
                return DecisionResult::found(TetherCurve::Catenary(base), base_len, pdp.iterations);
            }
            for k in 1..=10 {
                for sign in [1.0, -1.0] {
                    let l = base_len * (1.0 + sign * 0.01 * k as f64);
                    if l <= chord * (1.0 + TAUT_TOLERANCE) || l > max_length {
                        continue;
                    }
                    if let Ok(c) = catenary_from_length(a, b, l) {
                        if clear(&c) {
                            return DecisionResult::found(TetherCurve::Catenary(c), l, pdp.iterations + k);
                        }
                    }
                }
            }
            DecisionResult::none(pdp.iterations + 10)
        }
    }
}

/// Polyline resolution of the post-fit catenary collision test.
pub const RECHECK_SAMPLES: usize = 400;
