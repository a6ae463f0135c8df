mod common;

use common::integrate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tether_core::curves::{catenary_from_length, CatenaryParams, ParabolaParams, PlaneFrame, TetherCurve};
use tether_core::environment::{compute_edf, OccupancyGrid};
use tether_core::optimizer::{
    block_len, cost, free_variables, initial_curve, initialize_from_path, jacobian, optimize, recover_catenaries,
    residual_catenary_endpoints, residual_length, residual_parabola_endpoints, CurveMode, MarsupialState, Problem,
    SolverConfig, Trajectory, Weights,
};
use tether_core::planner::{PathNode, PlannerParams, PlanningEnv};
use tether_core::{Point2, Vec3};

fn open_env() -> PlanningEnv {
    let mut g = OccupancyGrid::new(0.25, Vec3::zeros(), [48, 40, 24]).unwrap();
    g.fill_ground();
    g.fill_box(Vec3::new(5.0, 7.0, 0.0), Vec3::new(6.0, 8.0, 3.0));
    PlanningEnv::new(compute_edf(&g).unwrap(), &PlannerParams::default())
}

/// A gently curving path: UGV on the floor, UAV ahead and above it.
fn path(env: &PlanningEnv, n: usize) -> Vec<PathNode> {
    let z = env.grid.cell_center(0, 0, 1).z;
    (0..n)
        .map(|i| {
            let t = i as f64;
            let p_g = Vec3::new(2.0 + 0.9 * t, 3.0 + 0.05 * t * t, z);
            let p_a = Vec3::new(3.0 + 0.8 * t, 3.5 + 0.1 * t, 2.5 + 0.1 * t);
            let d = (p_a - p_g).norm();
            PathNode { p_g, p_a, tether_length: d * 1.05, dp_used: false }
        })
        .collect()
}

#[test]
fn length_residual_examples() {
    let s = MarsupialState {
        p_g: Vec3::new(1.0, 1.0, 0.0),
        p_a: Vec3::new(1.0, 1.0, 5.0),
        tether: TetherCurve::Taut,
        dt: 1.0,
    };
    assert!((residual_length(&s, 10.0) - 1.006_737_946_999_085_5).abs() < 1e-12);
    assert!((residual_length(&s, 5.0) - 2.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let p_g = Vec3::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), 0.3);
        let p_a = p_g + Vec3::new(rng.gen_range(0.5..4.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..3.0));
        let d = (p_a - p_g).norm();
        let tether = initial_curve(p_g, p_a, d * rng.gen_range(1.01..1.5), CurveMode::Parabola).unwrap();
        let s = MarsupialState { p_g, p_a, tether, dt: 1.0 };
        let (a, b) = s.suspension();
        let TetherCurve::Parabola(par) = tether else { unreachable!() };
        let l = integrate(&|x| (1.0 + par.slope(x).powi(2)).sqrt(), a.x, b.x, 1e-13);
        let expect = (d - l).exp() + (l - 10.0).exp();
        assert!((residual_length(&s, 10.0) - expect).abs() < 1e-8);
    }
}

#[test]
fn length_residual_slope_matches_its_derivative() {
    let (p_g, p_a) = (Vec3::new(1.0, 1.0, 0.3), Vec3::new(4.0, 2.0, 3.0));
    let f = PlaneFrame::through(p_g, p_a);
    let (a, b) = (f.map_to_2d(p_g), f.map_to_2d(p_a));
    let d = a.distance(b);
    let at = |l: f64| {
        let c = catenary_from_length(a, b, l).unwrap();
        residual_length(&MarsupialState { p_g, p_a, tether: TetherCurve::Catenary(c), dt: 1.0 }, 10.0)
    };
    for l in [d * 1.01, d * 1.3, 7.0, 9.5] {
        let h = 1e-5;
        let fd = (at(l + h) - at(l - h)) / (2.0 * h);
        let exact = -(d - l).exp() + (l - 10.0).exp();
        assert!((fd - exact).abs() < 1e-5, "{l}: {fd} vs {exact}");
    }
}

#[test]
fn endpoint_residuals_vanish_on_interpolants() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..50 {
        let a = Point2::new(0.0, rng.gen_range(0.0..3.0));
        let b = Point2::new(rng.gen_range(1.0..6.0), rng.gen_range(0.0..3.0));
        let v = Point2::new(0.5 * b.x, a.y.min(b.y) - rng.gen_range(0.1..1.0));
        let par = ParabolaParams::through_three_points(a, b, v).unwrap();
        let (ra, rb) = residual_parabola_endpoints(&par, a, b);
        assert!(ra.abs() < 1e-10 && rb.abs() < 1e-10);
        let dr = rng.gen_range(-1.0..1.0);
        let dq = rng.gen_range(-1.0..1.0);
        let moved = ParabolaParams::new(par.p, par.q + dq, par.r + dr);
        let (ra, rb) = residual_parabola_endpoints(&moved, a, b);
        let hand = |x: f64| par.p * x * x + (par.q + dq) * x + par.r + dr;
        assert!((ra - (hand(a.x) - a.y)).abs() < 1e-10 && (rb - (hand(b.x) - b.y)).abs() < 1e-10);

        let cat = catenary_from_length(a, b, a.distance(b) * rng.gen_range(1.01..2.0)).unwrap();
        let (ca, cb) = residual_catenary_endpoints(&cat, a, b);
        assert!(ca.abs() < 1e-7 && cb.abs() < 1e-7);
        let up = CatenaryParams::new(cat.a, cat.x0, cat.y0 + 0.5);
        let (ca, cb) = residual_catenary_endpoints(&up, a, b);
        assert!((ca - 0.5).abs() < 1e-7 && (cb - 0.5).abs() < 1e-7);
    }
}

#[test]
fn initial_parabola_keeps_the_catenary_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        let p_g = Vec3::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), 0.3);
        let p_a = p_g + Vec3::new(rng.gen_range(0.5..4.0), rng.gen_range(-2.0..2.0), rng.gen_range(-0.2..3.0));
        let f = PlaneFrame::through(p_g, p_a);
        let (a, b) = (f.map_to_2d(p_g), f.map_to_2d(p_a));
        let length = a.distance(b) * rng.gen_range(1.01..1.5);
        let TetherCurve::Parabola(par) = initial_curve(p_g, p_a, length, CurveMode::Parabola).unwrap() else {
            unreachable!()
        };
        let cat = catenary_from_length(a, b, length).unwrap();
        let want = integrate(&|x| cat.eval(x), a.x, b.x, 1e-13);
        assert!((integrate(&|x| par.eval(x), a.x, b.x, 1e-13) - want).abs() < 1e-8);
    }

    let (p_g, p_a) = (Vec3::new(1.0, 1.0, 1.0), Vec3::new(4.0, 1.0, 1.0));
    let TetherCurve::Parabola(sym) = initial_curve(p_g, p_a, 3.5, CurveMode::Parabola).unwrap() else {
        unreachable!()
    };
    let f = PlaneFrame::through(p_g, p_a);
    let (a, b) = (f.map_to_2d(p_g), f.map_to_2d(p_a));
    assert!((sym.q + sym.p * (a.x + b.x)).abs() < 1e-9);
    let TetherCurve::Parabola(taut) = initial_curve(p_g, p_a, 3.0, CurveMode::Parabola).unwrap() else {
        unreachable!()
    };
    assert!(taut.p.abs() < 1e-12);
}

#[test]
fn jacobian_is_step_consistent() {
    let env = open_env();
    let w = Weights::default();
    let prob = Problem { env: &env, weights: &w, l_max: 10.0 };
    for mode in [CurveMode::Parabola, CurveMode::Catenary] {
        let traj = initialize_from_path(&path(&env, 6), mode, &w, 20).unwrap();
        let free = free_variables(&traj);
        let fine = jacobian(&traj, &prob, &free, 1e-7);
        let coarse = jacobian(&traj, &prob, &free, 1e-5);
        let scale = fine.abs().max().max(1.0);
        let diff = (&fine - &coarse).abs().max();
        assert!(diff <= 1e-4 * scale, "{mode:?}: {diff} vs {scale}");
        assert_eq!(fine.nrows(), block_len(20) * 6);
    }
}

/// The weighted objective written out family by family.
fn reference_cost(traj: &Trajectory, prob: &Problem) -> f64 {
    let w = prob.weights;
    let grid = &prob.env.grid;
    let st = &traj.states;
    let n = st.len();
    let angle = |a: Vec3, b: Vec3, c: Vec3| {
        let (u, v) = (b - a, c - b);
        let fade = |x: f64| x * x / (x * x + 0.01);
        (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos() * fade(u.norm()) * fade(v.norm())
    };
    let speed = |i: usize| ((st[i].p_g - st[i - 1].p_g).norm() / st[i].dt, (st[i].p_a - st[i - 1].p_a).norm() / st[i].dt);
    let hinge = |x: f64| x.max(0.0);
    let mut total = 0.0;
    for i in 0..n {
        let s = &st[i];
        let mut t = 0.0;
        if i >= 1 {
            let (vg, va) = speed(i);
            t += w.g_eg * ((s.p_g - st[i - 1].p_g).norm() - traj.rho_eg).powi(2);
            t += w.g_ea * ((s.p_a - st[i - 1].p_a).norm() - traj.rho_ea).powi(2);
            t += w.g_vg * (vg - w.rho_vg).powi(2) + w.g_va * (va - w.rho_va).powi(2);
        }
        if i >= 1 && i + 1 < n {
            let ((g0, a0), (g1, a1)) = (speed(i), speed(i + 1));
            let mdt = 0.5 * (s.dt + st[i + 1].dt);
            t += w.g_sg * hinge(angle(st[i - 1].p_g, s.p_g, st[i + 1].p_g) - w.rho_sg).powi(2);
            t += w.g_sa * hinge(angle(st[i - 1].p_a, s.p_a, st[i + 1].p_a) - w.rho_sa).powi(2);
            t += w.g_ag * ((g1 - g0) / mdt).powi(2) + w.g_aa * ((a1 - a0) / mdt).powi(2);
        }
        t += w.g_og * hinge(w.rho_og + w.platform_margin - grid.obstacle_distance_at(s.p_g).unwrap()).powi(2);
        t += w.g_oa * hinge(w.rho_oa + w.platform_margin - grid.distance_at(s.p_a).unwrap()).powi(2);
        let stand = prob.env.ground.snap(grid, s.p_g, s.p_g.z).unwrap();
        t += w.g_trav * hinge((s.p_g.z - stand.z).abs() - w.rho_trav).powi(2);
        for p in s.tether_points(traj.tether_samples_m) {
            t += w.g_ot * (w.beta * hinge(w.rho_ot + w.tether_margin - grid.distance_at(p).unwrap())).powi(2);
        }
        let (a, b) = s.suspension();
        let l = match s.tether {
            TetherCurve::Parabola(p) => integrate(&|x| (1.0 + p.slope(x).powi(2)).sqrt(), a.x, b.x, 1e-13),
            TetherCurve::Catenary(c) => integrate(&|x| (1.0 + c.slope(x).powi(2)).sqrt(), a.x, b.x, 1e-13),
            TetherCurve::Taut => a.distance(b),
        };
        t += w.g_u * ((a.distance(b) - l).exp() + (l - prob.l_max).exp()).powi(2);
        let (ea, eb) = match s.tether {
            TetherCurve::Parabola(p) => (p.eval(a.x) - a.y, p.eval(b.x) - b.y),
            TetherCurve::Catenary(c) => (c.eval(a.x) - a.y, c.eval(b.x) - b.y),
            TetherCurve::Taut => (0.0, 0.0),
        };
        t += w.g_p * (ea * ea + eb * eb);
        total += t;
    }
    total
}

#[test]
fn cost_matches_reference_sum() {
    let env = open_env();
    let w = Weights::default();
    let prob = Problem { env: &env, weights: &w, l_max: 10.0 };
    for mode in [CurveMode::Parabola, CurveMode::Catenary] {
        let traj = initialize_from_path(&path(&env, 8), mode, &w, 20).unwrap();
        let (c, r) = (cost(&traj, &prob), reference_cost(&traj, &prob));
        assert!((c - r).abs() <= 1e-10 * r.max(1.0), "{mode:?}: {c} vs {r}");
    }
}

#[test]
fn optimal_trajectory_stays_put() {
    // straight, equally spaced, at the desired speed, tethers vertical; with
    // a long maximum length only the constant chord term is left
    let env = open_env();
    let w = Weights::default();
    let prob = Problem { env: &env, weights: &w, l_max: 40.0 };
    let z = env.grid.cell_center(0, 0, 1).z;
    let states: Vec<MarsupialState> = (0..8)
        .map(|i| {
            let p_g = Vec3::new(2.0 + i as f64, 3.0, z);
            MarsupialState { p_g, p_a: p_g + Vec3::new(0.0, 0.0, 2.5), tether: TetherCurve::Taut, dt: 1.0 }
        })
        .collect();
    let traj = Trajectory { states, tether_samples_m: 20, mode: CurveMode::Parabola, rho_eg: 1.0, rho_ea: 1.0 };
    let c0 = cost(&traj, &prob);
    assert!((c0 - 8.0 * w.g_u).abs() < 1e-9, "{c0}");
    let (opt, report) = optimize(&traj, &prob, &SolverConfig::default()).unwrap();
    assert!(report.iterations <= 2, "{report:?}");
    assert!((report.final_cost - c0).abs() <= 1e-9);
    for (a, b) in opt.states.iter().zip(&traj.states) {
        assert!((a.p_g - b.p_g).norm() < 1e-9 && (a.p_a - b.p_a).norm() < 1e-9);
    }
}

#[test]
fn optimisation_never_raises_the_cost() {
    let env = open_env();
    let w = Weights::default();
    let prob = Problem { env: &env, weights: &w, l_max: 10.0 };
    for mode in [CurveMode::Parabola, CurveMode::Catenary] {
        let traj = initialize_from_path(&path(&env, 8), mode, &w, 20).unwrap();
        let cfg = SolverConfig { max_iters: 50, ..SolverConfig::default() };
        let (_, r) = optimize(&traj, &prob, &cfg).unwrap();
        assert!(r.final_cost < r.initial_cost);
        assert!(r.cost_history.windows(2).all(|p| p[1] <= p[0]));
    }
}

#[test]
fn recovery_keeps_lengths_in_range() {
    let env = open_env();
    let w = Weights::default();
    let prob = Problem { env: &env, weights: &w, l_max: 10.0 };
    let traj = initialize_from_path(&path(&env, 8), CurveMode::Parabola, &w, 20).unwrap();
    let (opt, _) = optimize(&traj, &prob, &SolverConfig::default()).unwrap();
    let (rec, report) = recover_catenaries(&opt, &env.grid, 10.0, w.rho_ot).unwrap();
    for (s, r) in rec.states.iter().zip(&report) {
        assert!(r.length >= r.chord * (1.0 - 1e-9) && r.length <= 10.0);
        assert_eq!(r.taut, matches!(s.tether, TetherCurve::Taut));
        if !r.taut {
            assert!(r.max_gap <= 0.035 * 10.0, "{r:?}");
        }
    }

    let p = Vec3::new(3.0, 3.0, 0.375);
    let vertical = MarsupialState { p_g: p, p_a: p + Vec3::new(0.0, 0.0, 2.0), tether: TetherCurve::Taut, dt: 1.0 };
    let t = Trajectory { states: vec![vertical; 2], tether_samples_m: 20, mode: CurveMode::Parabola, rho_eg: 0.0, rho_ea: 0.0 };
    let (rec, report) = recover_catenaries(&t, &env.grid, 10.0, w.rho_ot).unwrap();
    assert!(report.iter().all(|r| r.taut) && rec.states.iter().all(|s| s.tether == TetherCurve::Taut));
}
