//! Parabola and catenary tether models in the vertical plane through the two
//! suspension points, plus the three ways of turning a parabola into a
//! catenary (matching length, bisection on the max vertical gap, and a
//! sampled least-squares fit).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Vec3};

/// Relative slack on the chord below which a tether counts as taut.
pub const TAUT_TOLERANCE: f64 = 1e-9;

/// Samples used by the max-gap search inside the bisection fit.
pub const GAP_SEARCH_SAMPLES: usize = 200;

const BISECTION_MAX_ITERS: usize = 200;
const SAMPLING_MAX_ITERS: usize = 100;

/// Vertical plane through two 3D points. 2D abscissa is the horizontal
/// distance from `origin` along `u`; the 2D ordinate is world height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub span: f64,
}

impl PlaneFrame {
    /// Frame with `from` at abscissa 0 and `to` at abscissa `span`. A
    /// vertical pair gets an arbitrary horizontal direction and zero span.
    pub fn through(from: Vec3, to: Vec3) -> Self {
        let dx = to.x - from.x;
        let dy = to.y - from.y;
        let span = dx.hypot(dy);
        let u = if span > 1e-12 {
            Vec3::new(dx / span, dy / span, 0.0)
        } else {
            Vec3::new(1.0, 0.0, 0.0)
        };
        Self { origin: Vec3::new(from.x, from.y, 0.0), u, span }
    }

    pub fn map_to_2d(&self, p: Vec3) -> Point2 {
        let d = p - self.origin;
        Point2::new(d.x * self.u.x + d.y * self.u.y, p.z)
    }

    pub fn map_to_3d(&self, q: Point2) -> Vec3 {
        Vec3::new(self.origin.x + self.u.x * q.x, self.origin.y + self.u.y * q.x, q.y)
    }
}

/// Suspension points in canonical order (`a.x <= b.x`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionPair {
    pub a: Point2,
    pub b: Point2,
    /// Whether the caller's points were swapped to get `a` on the left.
    pub swapped: bool,
}

impl SuspensionPair {
    pub fn new(a: Point2, b: Point2) -> Result<Self> {
        if a.distance(b) <= 0.0 {
            return Err(Error::InvalidInput("suspension points coincide".into()));
        }
        Ok(if a.x <= b.x {
            Self { a, b, swapped: false }
        } else {
            Self { a: b, b: a, swapped: true }
        })
    }

    pub fn chord(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn span(&self) -> f64 {
        self.b.x - self.a.x
    }
}

fn ordered(a: Point2, b: Point2) -> (Point2, Point2) {
    if a.x <= b.x {
        (a, b)
    } else {
        (b, a)
    }
}

/// `y = p x^2 + q x + r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolaParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl ParabolaParams {
    pub const fn new(p: f64, q: f64, r: f64) -> Self {
        Self { p, q, r }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.p * x + self.q) * x + self.r
    }

    pub fn slope(&self, x: f64) -> f64 {
        2.0 * self.p * x + self.q
    }

    /// Straight segment through `a` and `b`.
    pub fn chord(a: Point2, b: Point2) -> Result<Self> {
        Self::hanging(a, b, 0.0)
    }

    /// The parabola `chord(x) + sag * (x - a.x)(x - b.x)` through `a`, `b`.
    pub fn hanging(a: Point2, b: Point2, sag: f64) -> Result<Self> {
        let (a, b) = ordered(a, b);
        let h = b.x - a.x;
        if h < 1e-12 {
            return Err(Error::CollinearAbscissae);
        }
        let m = (b.y - a.y) / h;
        Ok(Self {
            p: sag,
            q: m - sag * (a.x + b.x),
            r: a.y - m * a.x + sag * a.x * b.x,
        })
    }

    /// Interpolating parabola through three points (divided differences).
    pub fn through_three_points(a: Point2, b: Point2, v: Point2) -> Result<Self> {
        let tol = 1e-12 * (1.0 + a.x.abs().max(b.x.abs()).max(v.x.abs()));
        if (a.x - b.x).abs() <= tol || (a.x - v.x).abs() <= tol || (b.x - v.x).abs() <= tol {
            return Err(Error::CollinearAbscissae);
        }
        let f_ab = (b.y - a.y) / (b.x - a.x);
        let f_bv = (v.y - b.y) / (v.x - b.x);
        let mut p = (f_bv - f_ab) / (v.x - a.x);
        if p < 0.0 {
            let scale = 1.0 + f_ab.abs().max(f_bv.abs());
            if p < -1e-12 * scale {
                return Err(Error::NotHanging(p));
            }
            p = 0.0;
        }
        let q = f_ab - p * (a.x + b.x);
        let r = a.y - (p * a.x + q) * a.x;
        Ok(Self { p, q, r })
    }

    /// Parabola through `a` and `b` enclosing `area` between itself and the
    /// x-axis on `[a.x, b.x]`.
    pub fn from_area(a: Point2, b: Point2, area: f64) -> Result<Self> {
        let (a, b) = ordered(a, b);
        let h = b.x - a.x;
        if h < 1e-9 {
            return Err(Error::SingularSystem(h));
        }
        // The chord integrates to the trapezoid area and (x-a)(x-b) to -h^3/6,
        // so the three linear conditions decouple.
        let chord_area = 0.5 * (a.y + b.y) * h;
        let sag = 6.0 * (chord_area - area) / (h * h * h);
        Self::hanging(a, b, sag)
    }

    /// Parabola through `a`, `b` with arc length `length` (bisection on sag).
    pub fn with_length(a: Point2, b: Point2, length: f64) -> Result<Self> {
        let (a, b) = ordered(a, b);
        let chord = a.distance(b);
        if length <= chord * (1.0 + TAUT_TOLERANCE) {
            return Err(Error::TautTether { length, chord });
        }
        let len_of = |sag: f64| -> Result<f64> {
            let par = Self::hanging(a, b, sag)?;
            Ok(par.length(a.x, b.x))
        };
        let mut hi = 1.0 / (b.x - a.x);
        let mut guard = 0;
        while len_of(hi)? < length {
            hi *= 2.0;
            guard += 1;
            if guard > BISECTION_MAX_ITERS {
                return Err(Error::NoConvergence(guard));
            }
        }
        let mut lo = 0.0;
        for _ in 0..BISECTION_MAX_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if len_of(mid)? < length {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::hanging(a, b, 0.5 * (lo + hi))
    }

    /// Arc length on `[x1, x2]`.
    pub fn length(&self, x1: f64, x2: f64) -> f64 {
        parabola_length(self, x1, x2)
    }

    /// Signed area between the curve and the x-axis on `[x1, x2]`.
    pub fn area(&self, x1: f64, x2: f64) -> f64 {
        let prim = |x: f64| ((self.p / 3.0 * x + self.q / 2.0) * x + self.r) * x;
        prim(x2) - prim(x1)
    }

    /// Minimum of the curve over `[x1, x2]`.
    pub fn min_over(&self, x1: f64, x2: f64) -> f64 {
        let mut m = self.eval(x1).min(self.eval(x2));
        if self.p > 0.0 {
            let xv = -self.q / (2.0 * self.p);
            if xv > x1 && xv < x2 {
                m = m.min(self.eval(xv));
            }
        }
        m
    }
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: F, x1: f64, x2: f64) -> f64 {
    let c = 0.5 * (x1 + x2);
    let h = 0.5 * (x2 - x1);
    GL8.iter().map(|&(t, w)| w * (f(c - h * t) + f(c + h * t))).sum::<f64>() * h
}

/// Closed-form arc length of a parabola. Near-straight pieces, where the
/// closed form cancels catastrophically, use eight-point Gauss-Legendre.
pub fn parabola_length(par: &ParabolaParams, x1: f64, x2: f64) -> f64 {
    let dx = x2 - x1;
    if par.p.abs() < 1e-12 {
        return dx.hypot(par.q * dx);
    }
    let u1 = par.slope(x1);
    let u2 = par.slope(x2);
    if (u2 - u1).abs() < 1e-2 {
        return gauss_legendre(|x| par.slope(x).hypot(1.0), x1, x2);
    }
    let prim = |u: f64| u * u.hypot(1.0) + u.asinh();
    (prim(u2) - prim(u1)) / (4.0 * par.p)
}

/// `y = a cosh((x - x0) / a) + y0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatenaryParams {
    pub a: f64,
    pub x0: f64,
    pub y0: f64,
}

impl CatenaryParams {
    pub const fn new(a: f64, x0: f64, y0: f64) -> Self {
        Self { a, x0, y0 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        catenary_eval(self, x)
    }

    pub fn slope(&self, x: f64) -> f64 {
        ((x - self.x0) / self.a).sinh()
    }

    pub fn length(&self, x1: f64, x2: f64) -> f64 {
        catenary_length(self, x1, x2)
    }

    /// Signed area between the curve and the x-axis on `[x1, x2]`.
    pub fn area(&self, x1: f64, x2: f64) -> f64 {
        self.area_above_directrix(x1, x2) + self.y0 * (x2 - x1)
    }

    /// Area between the curve and the line `y = y0`.
    pub fn area_above_directrix(&self, x1: f64, x2: f64) -> f64 {
        self.a * self.length(x1, x2)
    }

    pub fn lowest_point(&self) -> Point2 {
        Point2::new(self.x0, self.a + self.y0)
    }

    pub fn min_over(&self, x1: f64, x2: f64) -> f64 {
        if self.x0 > x1 && self.x0 < x2 {
            self.a + self.y0
        } else {
            self.eval(x1).min(self.eval(x2))
        }
    }

    /// The catenary of parameter `a_param` through `a` and `b`.
    pub fn through(a_param: f64, a: Point2, b: Point2) -> Result<Self> {
        let (a, b) = ordered(a, b);
        let h = b.x - a.x;
        if h < 1e-12 {
            return Err(Error::CollinearAbscissae);
        }
        if !(a_param > 0.0) {
            return Err(Error::InvalidInput("catenary parameter must be positive".into()));
        }
        let half = (b.y - a.y) / (2.0 * a_param * (h / (2.0 * a_param)).sinh());
        let x0 = 0.5 * (a.x + b.x) - a_param * half.asinh();
        let y0 = a.y - a_param * ((a.x - x0) / a_param).cosh();
        Ok(Self { a: a_param, x0, y0 })
    }

    /// Catenary of arc length `length` hanging from `a` and `b`.
    pub fn from_length(a: Point2, b: Point2, length: f64) -> Result<Self> {
        catenary_from_length(a, b, length)
    }
}

pub fn catenary_eval(c: &CatenaryParams, x: f64) -> f64 {
    c.a * ((x - c.x0) / c.a).cosh() + c.y0
}

pub fn catenary_length(c: &CatenaryParams, x1: f64, x2: f64) -> f64 {
    c.a * (((x2 - c.x0) / c.a).sinh() - ((x1 - c.x0) / c.a).sinh())
}

/// Solves the span/sag reduction `2 a sinh(h / 2a) = sqrt(length^2 - v^2)`
/// for `a` by bracketed bisection, then recovers `x0` and `y0`.
pub fn catenary_from_length(a: Point2, b: Point2, length: f64) -> Result<CatenaryParams> {
    let (a, b) = ordered(a, b);
    let chord = a.distance(b);
    if !(length > chord * (1.0 + TAUT_TOLERANCE)) {
        return Err(Error::TautTether { length, chord });
    }
    let h = b.x - a.x;
    if h <= 1e-12 * (1.0 + chord) {
        return Err(Error::VerticalSpan);
    }
    let v = b.y - a.y;
    let target = ((length - v) * (length + v)).sqrt();
    // g(a) > 0 when `a` is too small (curve too long)
    let g = |k: f64| 2.0 * k * (h / (2.0 * k)).sinh() - target;

    let mut lo = chord / 10.0;
    let mut hi = lo;
    let mut steps = 0;
    while g(lo) <= 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > BISECTION_MAX_ITERS {
            return Err(Error::NoConvergence(steps));
        }
    }
    while g(hi) > 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > BISECTION_MAX_ITERS {
            return Err(Error::NoConvergence(steps));
        }
    }
    if hi == lo {
        hi = 2.0 * lo;
    }
    let mut iters = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iters += 1;
        if iters > BISECTION_MAX_ITERS {
            return Err(Error::NoConvergence(iters));
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    let xm = 0.5 * (a.x + b.x);
    let x0 = xm - k * (v / (2.0 * k * (h / (2.0 * k)).sinh())).asinh();
    let y0 = a.y - k * ((a.x - x0) / k).cosh();
    Ok(CatenaryParams { a: k, x0, y0 })
}

/// Sampled maximum of `|f - g|` on `[x1, x2]`: returns `(x_max, f - g at x_max)`.
pub fn max_vertical_gap<F, G>(f: F, g: G, x1: f64, x2: f64, samples: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = samples.max(2);
    let mut best: (f64, f64) = (x1, 0.0);
    for i in 0..n {
        let x = x1 + (x2 - x1) * i as f64 / (n - 1) as f64;
        let d = f(x) - g(x);
        if d.abs() > best.1.abs() {
            best = (x, d);
        }
    }
    best
}

/// Mean of `|f - g|` over `samples` uniform abscissae on `[x1, x2]`.
pub fn mean_vertical_gap<F, G>(f: F, g: G, x1: f64, x2: f64, samples: usize) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let x = x1 + (x2 - x1) * i as f64 / (n - 1) as f64;
            (f(x) - g(x)).abs()
        })
        .sum::<f64>()
        / n as f64
}

/// Catenary with the same arc length as the parabola between `a` and `b`.
pub fn fit_catenary_by_length(a: Point2, b: Point2, par: &ParabolaParams) -> Result<CatenaryParams> {
    let (a, b) = ordered(a, b);
    catenary_from_length(a, b, par.length(a.x, b.x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionFit {
    pub catenary: CatenaryParams,
    pub length: f64,
    /// Number of bracket halvings performed.
    pub iterations: usize,
}

/// Bisection on catenary length over `[d(a, b), max_length]`, discarding
/// half of the bracket by the sign of the parabola-minus-catenary gap at the
/// point where that gap is largest.
pub fn fit_catenary_bisection(
    a: Point2,
    b: Point2,
    par: &ParabolaParams,
    max_length: f64,
    eps: f64,
) -> Result<BisectionFit> {
    let (a, b) = ordered(a, b);
    let chord = a.distance(b);
    if max_length <= chord * (1.0 + TAUT_TOLERANCE) {
        return Err(Error::InvalidBracket { upper: max_length, chord });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("bisection tolerance {eps} must be positive")));
    }
    let mut lo = chord;
    let mut hi = max_length;
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        let cat = catenary_from_length(a, b, mid)?;
        if hi - lo <= eps {
            return Ok(BisectionFit { catenary: cat, length: mid, iterations });
        }
        let (_, d) = max_vertical_gap(|x| par.eval(x), |x| cat.eval(x), a.x, b.x, GAP_SEARCH_SAMPLES);
        if d < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > BISECTION_MAX_ITERS {
            return Err(Error::NoConvergence(iterations));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledFit {
    pub catenary: CatenaryParams,
    /// Sum of squared vertical gaps at the sample abscissae.
    pub residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `catenary` is the best iterate.
    pub converged: bool,
}

/// Least-squares catenary through `n` uniformly spaced samples of the
/// parabola, solved by Levenberg-Marquardt from the by-length fit.
pub fn fit_catenary_by_sampling(
    a: Point2,
    b: Point2,
    par: &ParabolaParams,
    n: usize,
) -> Result<SampledFit> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 samples, got {n}")));
    }
    let (a, b) = ordered(a, b);
    let init = fit_catenary_by_length(a, b, par)?;
    let xs: Vec<f64> = (0..n).map(|i| a.x + (b.x - a.x) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| par.eval(x)).collect();

    let cost = |c: &CatenaryParams| -> f64 {
        xs.iter().zip(&ys).map(|(&x, &y)| (c.eval(x) - y).powi(2)).sum()
    };

    let mut cur = init;
    let mut cur_cost = cost(&cur);
    let initial_residual = cur_cost;
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < SAMPLING_MAX_ITERS {
        iterations += 1;
        let mut jtj = nalgebra::Matrix3::<f64>::zeros();
        let mut jtr = nalgebra::Vector3::<f64>::zeros();
        for (&x, &y) in xs.iter().zip(&ys) {
            let u = (x - cur.x0) / cur.a;
            let (sh, ch) = (u.sinh(), u.cosh());
            let j = nalgebra::Vector3::new(ch - u * sh, -sh, 1.0);
            let r = cur.a * ch + cur.y0 - y;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        if jtr.norm() <= 1e-15 * (1.0 + cur_cost.sqrt()) {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..10 {
            let mut m = jtj;
            for k in 0..3 {
                m[(k, k)] += lambda * (jtj[(k, k)] + 1e-12);
            }
            let Some(step) = m.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let cand = CatenaryParams::new(cur.a + step[0], cur.x0 + step[1], cur.y0 + step[2]);
            let cand_cost = if cand.a > 0.0 { cost(&cand) } else { f64::INFINITY };
            if cand_cost.is_finite() && cand_cost < cur_cost {
                let rel = (cur_cost - cand_cost) / cur_cost.max(1e-300);
                cur = cand;
                cur_cost = cand_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    Ok(SampledFit { catenary: cur, residual: cur_cost, initial_residual, iterations, converged })
}

/// The tether shape in its vertical plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "lowercase")]
pub enum TetherCurve {
    /// Straight segment between the suspension points.
    Taut,
    Parabola(ParabolaParams),
    Catenary(CatenaryParams),
}

impl TetherCurve {
    /// Height at abscissa `x`; `a`, `b` are needed for the taut segment.
    pub fn eval(&self, a: Point2, b: Point2, x: f64) -> f64 {
        match self {
            TetherCurve::Taut => {
                let (a, b) = ordered(a, b);
                if b.x - a.x <= 0.0 {
                    a.y
                } else {
                    a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)
                }
            }
            TetherCurve::Parabola(p) => p.eval(x),
            TetherCurve::Catenary(c) => c.eval(x),
        }
    }

    pub fn length(&self, a: Point2, b: Point2) -> f64 {
        let (a, b) = ordered(a, b);
        match self {
            TetherCurve::Taut => a.distance(b),
            TetherCurve::Parabola(p) => p.length(a.x, b.x),
            TetherCurve::Catenary(c) => c.length(a.x, b.x),
        }
    }

    /// `n` points along the curve between the suspension points.
    pub fn sample(&self, a: Point2, b: Point2, n: usize) -> Vec<Point2> {
        let n = n.max(2);
        if (b.x - a.x).abs() <= 1e-12 {
            return (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect();
        }
        (0..n)
            .map(|i| {
                let x = a.x + (b.x - a.x) * i as f64 / (n - 1) as f64;
                Point2::new(x, self.eval(a, b, x))
            })
            .collect()
    }
}


#[cfg(test)]
mod tests {
    use super::oracle::integrate;
    use super::*;

    fn pt(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn three_point_parabola_examples() {
        let p = ParabolaParams::through_three_points(pt(0.0, 0.0), pt(2.0, 0.0), pt(1.0, -1.0)).unwrap();
        assert!((p.p - 1.0).abs() < 1e-15 && (p.q + 2.0).abs() < 1e-15 && p.r.abs() < 1e-15);

        let p = ParabolaParams::through_three_points(pt(0.0, 0.0), pt(1.0, 1.0), pt(0.5, 0.5)).unwrap();
        assert_eq!((p.p, p.q, p.r), (0.0, 1.0, 0.0));

        let (a, b, v) = (pt(0.0, 1.0), pt(4.0, 3.0), pt(1.0, 0.0));
        let p = ParabolaParams::through_three_points(a, b, v).unwrap();
        // independent route: 3x3 Vandermonde solve
        let m = nalgebra::Matrix3::new(0.0, 0.0, 1.0, 16.0, 4.0, 1.0, 1.0, 1.0, 1.0);
        let sol = m.lu().solve(&nalgebra::Vector3::new(1.0, 3.0, 0.0)).unwrap();
        assert!((p.p - sol[0]).abs() < 1e-12 && (p.q - sol[1]).abs() < 1e-12 && (p.r - sol[2]).abs() < 1e-12);
        for q in [a, b, v] {
            assert!((p.eval(q.x) - q.y).abs() < 1e-10);
        }
    }

    #[test]
    fn three_point_parabola_errors() {
        assert_eq!(
            ParabolaParams::through_three_points(pt(0.0, 0.0), pt(2.0, 0.0), pt(0.0, -1.0)),
            Err(Error::CollinearAbscissae)
        );
        assert!(matches!(
            ParabolaParams::through_three_points(pt(0.0, 0.0), pt(2.0, 0.0), pt(1.0, 1.0)),
            Err(Error::NotHanging(_))
        ));
    }

    #[test]
    fn parabola_length_examples() {
        let line = ParabolaParams::new(0.0, 1.0, 0.0);
        assert!((line.length(0.0, 1.0) - 2f64.sqrt()).abs() < 1e-15);

        let p = ParabolaParams::new(1.0, 0.0, 0.0);
        let quad = integrate(&|x: f64| (1.0 + 4.0 * x * x).sqrt(), 0.0, 1.0, 1e-14);
        assert!((p.length(0.0, 1.0) - quad).abs() < 1e-9);
        assert!((p.length(0.0, 1.0) - 1.478_942_857_5).abs() < 1e-9);

        let sym = ParabolaParams::new(1.0, -2.0, 0.0);
        assert!((sym.length(0.0, 2.0) - 2.0 * sym.length(0.0, 1.0)).abs() < 1e-14);
    }

    #[test]
    fn near_straight_length_is_stable() {
        for &p in &[1e-11, 1e-9, 1e-7, 1e-5, 1e-3] {
            let par = ParabolaParams::new(p, 0.3, 1.0);
            let quad = integrate(&|x: f64| par.slope(x).hypot(1.0), -2.0, 5.0, 1e-14);
            assert!((par.length(-2.0, 5.0) - quad).abs() < 1e-11, "p = {p}");
        }
    }

    #[test]
    fn parabola_from_area_examples() {
        let p = ParabolaParams::from_area(pt(0.0, 0.0), pt(2.0, 0.0), -4.0 / 3.0).unwrap();
        assert!((p.p - 1.0).abs() < 1e-14 && (p.q + 2.0).abs() < 1e-14 && p.r.abs() < 1e-14);

        let p = ParabolaParams::from_area(pt(0.0, 0.0), pt(2.0, 0.0), 0.0).unwrap();
        assert!(p.p.abs() < 1e-15 && p.q.abs() < 1e-15 && p.r.abs() < 1e-15);

        let (a, b) = (pt(0.0, 1.0), pt(3.0, 2.0));
        let cat = catenary_from_length(a, b, 4.0).unwrap();
        let cat_area = integrate(&|x| cat.eval(x), 0.0, 3.0, 1e-13);
        let p = ParabolaParams::from_area(a, b, cat_area).unwrap();
        let par_area = integrate(&|x| p.eval(x), 0.0, 3.0, 1e-13);
        assert!((par_area - cat_area).abs() < 1e-8);
        assert!((p.eval(0.0) - 1.0).abs() < 1e-10 && (p.eval(3.0) - 2.0).abs() < 1e-10);

        assert!(matches!(
            ParabolaParams::from_area(pt(1.0, 0.0), pt(1.0 + 1e-10, 0.0), 0.0),
            Err(Error::SingularSystem(_))
        ));
    }

    #[test]
    fn catenary_eval_and_length_examples() {
        assert_eq!(CatenaryParams::new(1.0, 0.0, 0.0).eval(0.0), 1.0);
        assert_eq!(CatenaryParams::new(1.0, 0.0, -1.0).eval(0.0), 0.0);
        let c = CatenaryParams::new(2.0, 1.0, 0.0);
        assert!((c.eval(3.0) - 2.0 * 1f64.cosh()).abs() < 1e-15);
        assert!((c.eval(3.0) - 3.086_161_269_6).abs() < 1e-9);

        let unit = CatenaryParams::new(1.0, 0.0, 0.0);
        let quad = integrate(&|x: f64| (1.0 + x.sinh().powi(2)).sqrt(), -1.0, 1.0, 1e-14);
        assert!((unit.length(-1.0, 1.0) - quad).abs() < 1e-9);
        assert!((unit.length(-1.0, 1.0) - 2.350_402_387_3).abs() < 1e-9);
        assert_eq!(unit.length(0.7, 0.7), 0.0);
        assert!((unit.length(0.0, 1.0) - 0.5 * unit.length(-1.0, 1.0)).abs() < 1e-15);
        assert_eq!(unit.lowest_point(), pt(0.0, 1.0));
    }

    #[test]
    fn catenary_from_length_examples() {
        let lam = 2.0 * 1f64.sinh();
        let c = catenary_from_length(pt(0.0, 1.0), pt(2.0, 1.0), lam).unwrap();
        assert!((c.a - 1.0).abs() < 1e-10);
        assert!((c.x0 - 1.0).abs() < 1e-10);
        assert!((c.y0 - (1.0 - 1f64.cosh())).abs() < 1e-10);

        assert!(matches!(
            catenary_from_length(pt(0.0, 0.0), pt(1.0, 0.0), 1.0),
            Err(Error::TautTether { .. })
        ));

        let (a, b) = (pt(0.0, 1.0), pt(3.0, 4.0));
        let c = catenary_from_length(a, b, 5.0).unwrap();
        assert!((c.eval(0.0) - 1.0).abs() < 1e-8);
        assert!((c.eval(3.0) - 4.0).abs() < 1e-8);
        assert!((c.length(0.0, 3.0) - 5.0).abs() < 1e-8);
    }

    #[test]
    fn catenary_from_length_handles_swapped_and_long_tethers() {
        let c = catenary_from_length(pt(3.0, 4.0), pt(0.0, 1.0), 5.0).unwrap();
        assert!((c.eval(0.0) - 1.0).abs() < 1e-8 && (c.eval(3.0) - 4.0).abs() < 1e-8);
        let c = catenary_from_length(pt(0.0, 1.0), pt(2.0, 1.5), 30.0).unwrap();
        assert!((c.length(0.0, 2.0) - 30.0).abs() < 1e-7);
        assert_eq!(catenary_from_length(pt(0.0, 0.0), pt(0.0, 2.0), 3.0), Err(Error::VerticalSpan));
    }

    #[test]
    fn by_length_fit() {
        let (a, b) = (pt(0.0, 1.0), pt(2.0, 1.0));
        let chord = ParabolaParams::chord(a, b).unwrap();
        assert!(matches!(fit_catenary_by_length(a, b, &chord), Err(Error::TautTether { .. })));

        let sym = ParabolaParams::new(1.0, -2.0, 1.0);
        let c = fit_catenary_by_length(a, b, &sym).unwrap();
        assert!((c.x0 - 1.0).abs() < 1e-9);
        let quad = integrate(&|x| sym.slope(x).hypot(1.0), 0.0, 2.0, 1e-13);
        assert!((c.length(0.0, 2.0) - quad).abs() < 1e-8);
    }

    #[test]
    fn bisection_fit_round_trip_and_iteration_bound() {
        let (a, b) = (pt(0.0, 1.0), pt(4.0, 2.5));
        let truth = catenary_from_length(a, b, 6.0).unwrap();
        // parabola matched to the catenary by length
        let par = ParabolaParams::with_length(a, b, 6.0).unwrap();
        let l_max = 30.0;
        let eps = 1e-2;
        let fit = fit_catenary_bisection(a, b, &par, l_max, eps).unwrap();
        assert!((fit.length - truth.length(0.0, 4.0)).abs() <= 0.5, "length {}", fit.length);
        let bound = ((l_max - a.distance(b)) / eps).log2().ceil() as usize;
        assert!(fit.iterations <= bound);
        assert!(matches!(
            fit_catenary_bisection(a, b, &par, a.distance(b), eps),
            Err(Error::InvalidBracket { .. })
        ));
    }

    #[test]
    fn bisection_fit_beats_length_fit_on_max_gap() {
        let (a, b) = (pt(0.0, 1.0), pt(2.0, 1.0));
        let par = ParabolaParams::new(1.0, -2.0, 1.0);
        let gap = |c: &CatenaryParams| max_vertical_gap(|x| par.eval(x), |x| c.eval(x), 0.0, 2.0, 2001).1.abs();
        let bis = fit_catenary_bisection(a, b, &par, 10.0, 1e-4).unwrap();
        let len = fit_catenary_by_length(a, b, &par).unwrap();
        assert!(gap(&bis.catenary) <= gap(&len) + 1e-3);
    }

    #[test]
    fn sampling_fit_improves_on_initialization() {
        let (a, b) = (pt(0.0, 1.0), pt(5.0, 3.0));
        let truth = catenary_from_length(a, b, 8.0).unwrap();
        let par = ParabolaParams::from_area(a, b, truth.area(0.0, 5.0)).unwrap();
        let fit = fit_catenary_by_sampling(a, b, &par, 5).unwrap();
        assert!(fit.residual <= fit.initial_residual);
        let init = fit_catenary_by_length(a, b, &par).unwrap();
        let mean = |c: &CatenaryParams| mean_vertical_gap(|x| par.eval(x), |x| c.eval(x), 0.0, 5.0, 1000);
        assert!(mean(&fit.catenary) < mean(&init));
    }

    #[test]
    fn sampling_fit_keeps_symmetry() {
        let (a, b) = (pt(0.0, 2.0), pt(4.0, 2.0));
        let par = ParabolaParams::hanging(a, b, 0.3).unwrap();
        let fit = fit_catenary_by_sampling(a, b, &par, 3).unwrap();
        assert!((fit.catenary.x0 - 2.0).abs() < 1e-6);
        assert!(matches!(fit_catenary_by_sampling(a, b, &par, 2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn with_length_hits_target() {
        let (a, b) = (pt(0.0, 1.0), pt(3.0, 2.0));
        let p = ParabolaParams::with_length(a, b, 4.5).unwrap();
        assert!((p.length(0.0, 3.0) - 4.5).abs() < 1e-9);
        assert!((p.eval(0.0) - 1.0).abs() < 1e-12 && (p.eval(3.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn plane_frame_round_trip() {
        let f = PlaneFrame::through(Vec3::new(1.0, 2.0, 0.5), Vec3::new(4.0, -2.0, 3.0));
        assert!((f.span - 5.0).abs() < 1e-15);
        assert!(f.u.z == 0.0 && (f.u.norm() - 1.0).abs() < 1e-15);
        let q = Point2::new(2.5, 1.7);
        let back = f.map_to_2d(f.map_to_3d(q));
        assert!((back.x - q.x).abs() < 1e-12 && (back.y - q.y).abs() < 1e-12);
        let b2 = f.map_to_2d(Vec3::new(4.0, -2.0, 3.0));
        assert!((b2.x - 5.0).abs() < 1e-12 && b2.y == 3.0);
    }

    #[test]
    fn suspension_pair_is_canonical() {
        let s = SuspensionPair::new(pt(3.0, 1.0), pt(0.0, 2.0)).unwrap();
        assert!(s.swapped && s.a.x < s.b.x);
        assert!(SuspensionPair::new(pt(1.0, 1.0), pt(1.0, 1.0)).is_err());
    }
}
