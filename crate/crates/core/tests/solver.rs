mod common;

use common::*;
use ndarray::Array2;
use polyedge::scenes::step_scene;
use polyedge::{
    condat_step, diff_horizontal, group_size, solve, BasisKind, CoefficientField64, DiffField64,
    Direction, Image64, ProblemSpec64, SolverConfig64, SolverState64,
};
use polyedge_oracle::DenseProblem;

fn dense(spec: &ProblemSpec64) -> DenseProblem {
    let (m, n) = spec.op().dim();
    DenseProblem::new(
        m,
        n,
        &basis_images_cm(spec.op()),
        vec_cm(spec.y().view()),
        spec.lambda(),
        spec.delta(),
    )
}

fn random_state(rng: &mut TestRng, spec: &ProblemSpec64) -> SolverState64 {
    let k = spec.op().degree();
    let (m, n) = spec.op().dim();
    let g = group_size(k);
    let mut s = SolverState64::new(spec, Some(rng.field(k, m, n))).unwrap();
    s.u1 = DiffField64::from_maps(Direction::Vertical, k, rng.array3((g, m - 1, n))).unwrap();
    s.u2 = DiffField64::from_maps(Direction::Horizontal, k, rng.array3((g, m, n - 1))).unwrap();
    s.u3 = rng.array2((m, n));
    s
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_against_dense(k: usize, m: usize, n: usize, rho: f64, steps: usize, seed: u64) {
    let mut rng = TestRng::new(seed);
    let op = op(k, m, n, BasisKind::Standard);
    let y: Image64 = rng.array2((m, n)) * 50.0;
    let delta = 0.3 * vec_cm(y.view()).iter().map(|v| v * v).sum::<f64>().sqrt();
    let spec = ProblemSpec64::new(y, op, 0.7, delta).unwrap();
    let mut cfg = SolverConfig64::default_for(spec.op());
    cfg.rho = rho;
    let d = dense(&spec);

    let mut state = random_state(&mut rng, &spec);
    let mut x = state.x.flatten();
    let mut u = [
        vec_maps_cm(state.u1.maps()),
        vec_maps_rm(state.u2.maps()),
        vec_cm(state.u3.view()),
    ];
    for step in 0..steps {
        state = condat_step(state, &spec, &cfg).unwrap();
        let (x_new, u_new) = d.condat_step(&x, [&u[0], &u[1], &u[2]], cfg.xi, cfg.sigma, rho);
        x = x_new;
        u = u_new;
        let errs = [
            max_abs_diff(&state.x.flatten(), &x),
            max_abs_diff(&vec_maps_cm(state.u1.maps()), &u[0]),
            max_abs_diff(&vec_maps_rm(state.u2.maps()), &u[1]),
            max_abs_diff(&vec_cm(state.u3.view()), &u[2]),
        ];
        for (name, e) in ["x", "u1", "u2", "u3"].iter().zip(errs) {
            assert!(
                e < 1e-9,
                "K={k} {m}x{n} rho={rho} step {step}: {name} off by {e:e}"
            );
        }
        let rec = state.history.last().unwrap();
        assert!((rec.objective - d.objective(&x)).abs() <= 1e-9 * rec.objective.max(1.0));
    }
}

#[test]
fn single_step_matches_literal_transcription() {
    check_against_dense(0, 4, 4, 1.0, 1, 31);
}

#[test]
fn trajectories_match_literal_transcription() {
    check_against_dense(1, 5, 4, 1.0, 25, 32);
    check_against_dense(2, 4, 6, 1.0, 10, 33);
    check_against_dense(1, 4, 4, 1.6, 25, 34);
    check_against_dense(0, 3, 7, 0.5, 25, 35);
}

#[test]
fn duals_stay_feasible() {
    let mut rng = TestRng::new(36);
    let (m, n) = (7, 6);
    let op = op(1, m, n, BasisKind::Standard);
    let y: Image64 = rng.array2((m, n)) * 100.0;
    let lambda = 0.4;
    let spec = ProblemSpec64::new(y, op, lambda, 20.0).unwrap();
    let cfg = SolverConfig64::default_for(spec.op());
    let mut state = SolverState64::new(&spec, None).unwrap();
    for _ in 0..200 {
        state = condat_step(state, &spec, &cfg).unwrap();
        assert!(state.u1.group_norms().iter().all(|&v| v <= 1.0 + 1e-9));
        assert!(state.u2.group_norms().iter().all(|&v| v <= lambda + 1e-9));
    }
}

#[test]
fn fixed_point_residual_settles_in_windowed_median() {
    let mut rng = TestRng::new(37);
    let (m, n) = (8, 8);
    let y: Image64 = rng.array2((m, n)) * 60.0 + 100.0;
    let spec = ProblemSpec64::new(y, op(1, m, n, BasisKind::Standard), 1.0, 40.0).unwrap();
    let cfg = SolverConfig64::default_for(spec.op()).with_max_iters(1000);
    let (_, state) = solve(&spec, &cfg, None).unwrap();
    let res: Vec<f64> = state
        .history
        .iter()
        .map(|r| r.fixed_point_residual)
        .collect();
    let median = |w: &[f64]| {
        let mut v = w.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let medians: Vec<f64> = res.chunks(50).map(median).collect();
    for pair in medians.windows(2) {
        assert!(
            pair[1] <= pair[0] * (1.0 + 1e-9),
            "window medians {medians:?}"
        );
    }
}

#[test]
fn polynomial_image_is_fit_with_flat_maps() {
    let (m, n) = (9, 7);
    let op = op(2, m, n, BasisKind::Standard);
    let mut coeffs = CoefficientField64::zeros(2, m, n);
    for (g, c) in [80.0, 20.0, -15.0, 10.0, 5.0, -8.0, 12.0, 3.0, -4.0]
        .iter()
        .enumerate()
    {
        coeffs
            .maps_mut()
            .index_axis_mut(ndarray::Axis(0), g)
            .fill(*c);
    }
    let y = op.apply(&coeffs).unwrap();
    let delta = 0.5;
    let spec = ProblemSpec64::new(y, op, 1.0, delta).unwrap();
    let cfg = SolverConfig64::default_for(spec.op()).with_max_iters(20000);
    let (xhat, _) = solve(&spec, &cfg, None).unwrap();
    assert!(spec.residual_norm(&xhat) <= delta + 1e-6);
    // the flat field has zero penalty, so the optimum is zero as well
    assert!(
        spec.objective(&xhat) < 1e-4,
        "objective {}",
        spec.objective(&xhat)
    );
}

#[test]
fn step_edge_lands_on_the_boundary_column() {
    let (m, n, split) = (4, 12, 5);
    let scene = step_scene::<f64>(m, n, split, 40.0, 200.0);
    let op = op(0, m, n, BasisKind::Standard);
    let spec = ProblemSpec64::new(scene.image.clone(), op, 1.0, 30.0).unwrap();
    let cfg = SolverConfig64::default_for(spec.op()).with_max_iters(5000);
    let (xhat, _) = solve(&spec, &cfg, None).unwrap();
    let dh = diff_horizontal(&xhat).unwrap();
    let norms = dh.group_norms();
    let per_col: Vec<f64> = (0..n - 1).map(|c| norms.column(c).sum()).collect();
    let total: f64 = per_col.iter().sum();
    assert!(
        per_col[split - 1] > 0.99 * total,
        "column jumps {per_col:?}"
    );
}

#[test]
fn scaling_data_and_radius_scales_the_optimum() {
    let mut rng = TestRng::new(38);
    let (m, n) = (6, 6);
    let y: Image64 = rng.array2((m, n)) * 50.0 + 80.0;
    let c = 3.5;
    let op1 = op(1, m, n, BasisKind::Standard);
    // primal steps scale with c and dual steps with 1/c, so the iterates scale exactly
    let cfg = SolverConfig64::default_for(&op1)
        .with_step_ratio(1e4)
        .with_max_iters(20000);
    let cfg_scaled = cfg.with_step_ratio(1e4 * c * c);
    let base = ProblemSpec64::new(y.clone(), op1.clone(), 1.0, 25.0).unwrap();
    let scaled = ProblemSpec64::new(&y * c, op1, 1.0, 25.0 * c).unwrap();
    let (x1, _) = solve(&base, &cfg, None).unwrap();
    let (x2, _) = solve(&scaled, &cfg_scaled, None).unwrap();
    let f1 = base.objective(&x1);
    let f2 = scaled.objective(&x2);
    assert!(((c * f1 - f2) / f2).abs() < 1e-6, "{} vs {}", c * f1, f2);
    let cx1 = CoefficientField64::from_maps(1, x1.maps() * c).unwrap();
    assert!(scaled.residual_norm(&cx1) <= 25.0 * c * (1.0 + 1e-6));
    assert!(rel_err(&x2.flatten(), &cx1.flatten()) < 1e-6);
}

#[test]
fn step_ratio_keeps_the_bound() {
    let op = op(2, 10, 10, BasisKind::Standard);
    for ratio in [1e-3, 0.5, 1.0, 7.0, 1e4] {
        let cfg = SolverConfig64::default_for(&op).with_step_ratio(ratio);
        cfg.validate(&op).unwrap();
        assert!((cfg.xi / cfg.sigma / ratio - 1.0).abs() < 1e-9);
    }
}

#[test]
fn small_instance_reaches_subgradient_reference() {
    let mut rng = TestRng::new(39);
    let (m, n) = (5, 5);
    let y: Image64 = rng.array2((m, n)) * 40.0 + 100.0;
    let delta = 30.0;
    let spec = ProblemSpec64::new(y, op(0, m, n, BasisKind::Standard), 1.0, delta).unwrap();
    let cfg = SolverConfig64::default_for(spec.op()).with_max_iters(20000);
    let (xhat, _) = solve(&spec, &cfg, None).unwrap();
    let d = dense(&spec);
    let (_, reference) = d.projected_subgradient(&xhat.flatten(), 200_000, 20, 1.0, 0.5);
    let f = spec.objective(&xhat);
    assert!(spec.residual_norm(&xhat) <= delta * (1.0 + 1e-6));
    assert!(f <= reference * (1.0 + 1e-4), "{f} vs {reference}");
}

#[test]
fn f32_solve_tracks_f64() {
    let mut rng = TestRng::new(40);
    let (m, n) = (6, 5);
    let y: Image64 = rng.array2((m, n)) * 30.0 + 60.0;
    let spec = ProblemSpec64::new(y.clone(), op(1, m, n, BasisKind::Standard), 1.0, 10.0).unwrap();
    let cfg = SolverConfig64::default_for(spec.op()).with_max_iters(300);
    let (x64, _) = solve(&spec, &cfg, None).unwrap();

    let y32: Array2<f32> = y.mapv(|v| v as f32);
    let op32 = polyedge::SynthesisOperator32::for_image(1, m, n, BasisKind::Standard).unwrap();
    let spec32 = polyedge::ProblemSpec::new(y32, op32, 1.0f32, 10.0).unwrap();
    let cfg32 = polyedge::SolverConfig::default_for(spec32.op()).with_max_iters(300);
    let (x32, _) = solve(&spec32, &cfg32, None).unwrap();
    let a: Vec<f64> = x32.flatten().iter().map(|&v| v as f64).collect();
    assert!(rel_err(&a, &x64.flatten()) < 1e-3);
}
