//! Parabola-to-catenary approximation benchmark: random parabolas from A =
//! (0, 1) to a higher B, each turned into a catenary by length matching,
//! max-gap bisection and sampled least squares.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tether_core::curves::{
    fit_catenary_bisection, fit_catenary_by_length, fit_catenary_by_sampling, mean_vertical_gap, CatenaryParams,
    ParabolaParams,
};
use tether_core::Point2;

use crate::stats::summarize;

pub const MAX_LENGTH: f64 = 30.0;

/// Points the mean vertical gap is averaged over.
pub const GAP_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitCase {
    pub a: Point2,
    pub b: Point2,
    pub length: f64,
    pub parabola: ParabolaParams,
}

pub fn gen_fit_benchmark(n: usize, seed: u64) -> Vec<FitCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Point2::new(0.0, 1.0);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let b = Point2::new(rng.gen_range(2.0..10.0), rng.gen_range(1.5..=6.0));
        let chord = a.distance(b);
        let length = rng.gen_range(1.05 * chord..=MAX_LENGTH);
        if let Ok(parabola) = ParabolaParams::with_length(a, b, length) {
            out.push(FitCase { a, b, length, parabola });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    ByLength,
    ByFitting,
    BySampling,
}

pub const METHODS: [FitMethod; 3] = [FitMethod::ByLength, FitMethod::ByFitting, FitMethod::BySampling];

impl FitMethod {
    pub fn tag(self) -> &'static str {
        match self {
            FitMethod::ByLength => "by_length",
            FitMethod::ByFitting => "by_fitting",
            FitMethod::BySampling => "by_sampling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub case: usize,
    pub method: &'static str,
    pub bx: f64,
    pub by: f64,
    pub length: f64,
    pub eps_mean: f64,
    pub eps_over_l: f64,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTiming {
    pub case: usize,
    pub method: &'static str,
    pub time_ns: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub method: &'static str,
    pub cases: usize,
    pub eps_mean: f64,
    pub eps_mean_std: f64,
    pub eps_over_l: f64,
    pub eps_over_l_std: f64,
}

pub fn fit(method: FitMethod, case: &FitCase, eps: f64, points: usize) -> tether_core::Result<CatenaryParams> {
    match method {
        FitMethod::ByLength => fit_catenary_by_length(case.a, case.b, &case.parabola),
        FitMethod::ByFitting => fit_catenary_bisection(case.a, case.b, &case.parabola, MAX_LENGTH, eps).map(|f| f.catenary),
        FitMethod::BySampling => fit_catenary_by_sampling(case.a, case.b, &case.parabola, points).map(|f| f.catenary),
    }
}

pub fn run_fit_benchmark(cases: &[FitCase], eps: f64, points: usize) -> (Vec<FitRow>, Vec<FitTiming>) {
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for (k, case) in cases.iter().enumerate() {
        for method in METHODS {
            let t0 = Instant::now();
            let res = fit(method, case, eps, points);
            let time_ns = t0.elapsed().as_nanos();
            let (eps_mean, status) = match res {
                Ok(c) => (
                    mean_vertical_gap(|x| case.parabola.eval(x), |x| c.eval(x), 0.0, case.b.x, GAP_SAMPLES),
                    "ok",
                ),
                Err(_) => (f64::NAN, "error"),
            };
            rows.push(FitRow {
                case: k,
                method: method.tag(),
                bx: case.b.x,
                by: case.b.y,
                length: case.length,
                eps_mean,
                eps_over_l: eps_mean / case.length,
                status,
            });
            timings.push(FitTiming { case: k, method: method.tag(), time_ns });
        }
    }
    (rows, timings)
}

pub fn summarize_fit(rows: &[FitRow]) -> Vec<FitSummary> {
    METHODS
        .iter()
        .map(|m| {
            let mine: Vec<&FitRow> = rows.iter().filter(|r| r.method == m.tag() && r.status == "ok").collect();
            let e = summarize(&mine.iter().map(|r| r.eps_mean).collect::<Vec<_>>());
            let q = summarize(&mine.iter().map(|r| r.eps_over_l).collect::<Vec<_>>());
            FitSummary {
                method: m.tag(),
                cases: mine.len(),
                eps_mean: e.mean,
                eps_mean_std: e.std,
                eps_over_l: q.mean,
                eps_over_l_std: q.std,
            }
        })
        .collect()
}
