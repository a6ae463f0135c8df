//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use tether_core::environment::OccupancyGrid;

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * whole.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 24)
}

/// Nearest occupied cell centre for every cell, by exhaustive search, with
/// `None` when the grid is free.
pub fn brute_force_edf(grid: &OccupancyGrid, skip_ground: bool) -> Vec<Option<f64>> {
    let [nx, ny, nz] = grid.dims;
    let mut occupied = Vec::new();
    for iz in 0..nz {
        if skip_ground && iz == 0 {
            continue;
        }
        for iy in 0..ny {
            for ix in 0..nx {
                if grid.is_occupied(ix, iy, iz) {
                    occupied.push([ix as f64, iy as f64, iz as f64]);
                }
            }
        }
    }
    let mut out = vec![None; nx * ny * nz];
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let c = [ix as f64, iy as f64, iz as f64];
                let best = occupied
                    .iter()
                    .map(|o| (o[0] - c[0]).powi(2) + (o[1] - c[1]).powi(2) + (o[2] - c[2]).powi(2))
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() {
                    out[grid.index(ix, iy, iz)] = Some(best.sqrt() * grid.resolution);
                }
            }
        }
    }
    out
}

pub mod pdp {
    use rand::Rng;
    use tether_core::decision::{clip_for_decision, Obstacle2D, TrapezoidT};
    use tether_core::geometry::convex_hull;
    use tether_core::Point2;

    const EPS: f64 = 1e-9;

    /// `y = p x^2 + q x + r` through three points, by Lagrange coefficients.
    pub fn interpolate(a: Point2, b: Point2, v: Point2) -> (f64, f64, f64) {
        let la = a.y / ((a.x - b.x) * (a.x - v.x));
        let lb = b.y / ((b.x - a.x) * (b.x - v.x));
        let lv = v.y / ((v.x - a.x) * (v.x - b.x));
        let p = la + lb + lv;
        let q = -(la * (b.x + v.x) + lb * (a.x + v.x) + lv * (a.x + b.x));
        let r = la * b.x * v.x + lb * a.x * v.x + lv * a.x * b.x;
        (p, q, r)
    }

    /// Extremes of `y - f(x)` along each edge; the curve crosses the polygon
    /// when points lie strictly on both sides.
    pub fn crosses(c: (f64, f64, f64), poly: &[Point2]) -> bool {
        let f = |x: f64| (c.0 * x + c.1) * x + c.2;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..poly.len() {
            let (s, e) = (poly[i], poly[(i + 1) % poly.len()]);
            let h = |t: f64| {
                let x = s.x + t * (e.x - s.x);
                let y = s.y + t * (e.y - s.y);
                y - f(x)
            };
            let mut ts = vec![0.0, 1.0];
            let dx = e.x - s.x;
            if c.0 != 0.0 && dx != 0.0 {
                // h'(t) = dy - (2 p x(t) + q) dx = 0
                let t = ((e.y - s.y) / dx - c.1 - 2.0 * c.0 * s.x) / (2.0 * c.0 * dx);
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
            for t in ts {
                lo = lo.min(h(t));
                hi = hi.max(h(t));
            }
        }
        lo < -EPS && hi > EPS
    }

    fn length(c: (f64, f64, f64), x1: f64, x2: f64) -> f64 {
        super::integrate(&|x: f64| (1.0 + (2.0 * c.0 * x + c.1).powi(2)).sqrt(), x1, x2, 1e-13)
    }

    fn min_over(c: (f64, f64, f64), x1: f64, x2: f64) -> f64 {
        let f = |x: f64| (c.0 * x + c.1) * x + c.2;
        let mut m = f(x1).min(f(x2));
        if c.0 > 0.0 {
            let xs = -c.1 / (2.0 * c.0);
            if xs > x1 && xs < x2 {
                m = m.min(f(xs));
            }
        }
        m
    }

    /// Shortest collision-free curve among the chord and every parabola
    /// through a hull vertex below it; `None` when none is clear of the
    /// ground and the obstacles within `max_length`.
    pub fn brute_force(a: Point2, b: Point2, obstacles: &[Obstacle2D], max_length: f64, ground_y: f64) -> Option<f64> {
        let hulls: Vec<Vec<Point2>> = obstacles.iter().map(|o| convex_hull(&o.vertices)).collect();
        let slope = (b.y - a.y) / (b.x - a.x);
        let mut candidates = vec![(0.0, slope, a.y - slope * a.x)];
        for h in &hulls {
            for &v in h {
                if v.x > a.x + 1e-12 && v.x < b.x - 1e-12 {
                    let c = interpolate(a, b, v);
                    if c.0 > 0.0 {
                        candidates.push(c);
                    }
                }
            }
        }
        let best = candidates
            .into_iter()
            .filter(|&c| min_over(c, a.x, b.x) > ground_y + EPS)
            .filter(|&c| hulls.iter().all(|h| !crosses(c, h)))
            .map(|c| length(c, a.x, b.x))
            .fold(f64::INFINITY, f64::min);
        (best <= max_length).then_some(best)
    }

    pub struct Scene {
        pub a: Point2,
        pub b: Point2,
        pub ground_y: f64,
        pub max_length: f64,
        pub raw: Vec<Obstacle2D>,
        pub clipped: Vec<Obstacle2D>,
    }

    /// Up to four random convex polygons of at most six vertices around the
    /// region under the chord.
    pub fn random_scene<R: Rng>(rng: &mut R) -> Scene {
        let span = rng.gen_range(2.0..10.0);
        let a = Point2::new(0.0, rng.gen_range(1.0..5.0));
        let b = Point2::new(span, rng.gen_range(1.0..5.0));
        let max_length = a.distance(b) * rng.gen_range(1.05..1.8);
        let n = rng.gen_range(1..=4);
        let top = a.y.max(b.y);
        let raw: Vec<Obstacle2D> = (0..n)
            .filter_map(|_| {
                let cx = rng.gen_range(0.0..span);
                let cy = rng.gen_range(0.0..top);
                let r = rng.gen_range(0.2..1.5);
                let k = rng.gen_range(3..=6);
                let pts: Vec<Point2> = (0..k)
                    .map(|_| Point2::new(cx + rng.gen_range(-r..r), cy + rng.gen_range(-r..r)))
                    .collect();
                let hull = convex_hull(&pts);
                Obstacle2D::new(hull).ok()
            })
            .collect();
        let clipped = clip_for_decision(&raw, &TrapezoidT::new(a, b, 0.0));
        Scene { a, b, ground_y: 0.0, max_length, raw, clipped }
    }
}
