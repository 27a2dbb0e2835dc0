mod common;

use common::*;
use ndarray::{s, Array2};
use polyedge::edges::sobel_magnitude_raw;
use polyedge::io::{decode_pgm, encode_pgm};
use polyedge::{
    add_gaussian_noise, dual_ball_step, edges_from_parameter_maps, group_soft_threshold,
    project_l2_ball, score_edges, sobel_magnitude, threshold_map, BasisKind, CoefficientField64,
    DiffField64, Direction, GroupThreshold, Image64, NoiseSpec,
};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (0usize..=2).prop_flat_map(|k| {
        let lo = (k + 1).max(2);
        (Just(k), lo..=7usize, lo..=7usize, any::<u64>())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn basis_energy_is_separable((k, m, n, _) in shape(), ortho in any::<bool>()) {
        let kind = if ortho { BasisKind::Orthonormal } else { BasisKind::Standard };
        let op = op(k, m, n, kind);
        let basis = op.basis();
        let energy = |v: &[ndarray::Array1<f64>], i: usize| v.iter().map(|b| b[i] * b[i]).sum::<f64>();
        let diag = op.diag_ppt();
        for i in 0..m {
            for j in 0..n {
                let want = energy(basis.vertical().vectors(), i) * energy(basis.horizontal().vectors(), j);
                prop_assert!((diag[[i, j]] - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn synthesis_adjoint_identity((k, m, n, seed) in shape()) {
        let mut rng = TestRng::new(seed);
        let op = op(k, m, n, BasisKind::Standard);
        let x = rng.field(k, m, n);
        let r = rng.array2((m, n));
        let lhs = (&op.apply(&x).unwrap() * &r).sum();
        let rhs = x.dot(&op.adjoint(&r).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn flatten_round_trip((k, m, n, seed) in shape()) {
        let x = TestRng::new(seed).field(k, m, n);
        let back = CoefficientField64::unflatten(k, m, n, &x.flatten()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn soft_threshold_is_nonexpansive((k, m, n, seed) in shape(), tau in 0.0f64..3.0) {
        let mut rng = TestRng::new(seed);
        let g = (k + 1) * (k + 1);
        let a = DiffField64::from_maps(Direction::Vertical, k, rng.array3((g, m - 1, n)) * 4.0).unwrap();
        let b = DiffField64::from_maps(Direction::Vertical, k, rng.array3((g, m - 1, n)) * 4.0).unwrap();
        let t = GroupThreshold::new(tau).unwrap();
        let ta = group_soft_threshold(&a, t);
        let tb = group_soft_threshold(&b, t);
        let before = (a.maps() - b.maps()).mapv(|v| v * v).sum().sqrt();
        let after = (ta.maps() - tb.maps()).mapv(|v| v * v).sum().sqrt();
        prop_assert!(after <= before * (1.0 + 1e-12) + 1e-15);
        // each group shrinks radially by tau
        for (na, nt) in a.group_norms().iter().zip(ta.group_norms().iter()) {
            prop_assert!((nt - (na - tau).max(0.0)).abs() <= 1e-12 * na.max(1.0));
        }
    }

    #[test]
    fn dual_ball_step_lands_in_ball((k, m, n, seed) in shape(), radius in 0.0f64..3.0) {
        let mut rng = TestRng::new(seed);
        let g = (k + 1) * (k + 1);
        let p = DiffField64::from_maps(Direction::Horizontal, k, rng.array3((g, m, n - 1)) * 5.0).unwrap();
        let out = dual_ball_step(&p, radius).unwrap();
        prop_assert!(out.group_norms().iter().all(|&v| v <= radius + 1e-12));
    }

    #[test]
    fn ball_projection_is_idempotent((_, m, n, seed) in shape(), delta in 0.0f64..20.0) {
        let mut rng = TestRng::new(seed);
        let z: Image64 = rng.array2((m, n)) * 30.0;
        let c: Image64 = rng.array2((m, n)) * 30.0;
        let once = project_l2_ball(&z, &c, delta).unwrap();
        let dist = (&once - &c).mapv(|v| v * v).sum().sqrt();
        prop_assert!(dist <= delta + 1e-9);
        let twice = project_l2_ball(&once, &c, delta).unwrap();
        let moved = (&twice - &once).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
        prop_assert!(moved <= 1e-12 * 30.0);
    }

    #[test]
    fn threshold_is_monotone((_, m, n, seed) in shape(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        prop_assume!(m >= 3 && n >= 3);
        let img = TestRng::new(seed).array2((m, n));
        let g = sobel_magnitude(&img).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = threshold_map(&g, lo).unwrap();
        let b = threshold_map(&g, hi).unwrap();
        prop_assert!(b.mask.iter().zip(a.mask.iter()).all(|(&hb, &ha)| !hb || ha));
    }

    #[test]
    fn sobel_commutes_with_interior_shifts(seed in any::<u64>()) {
        let big = TestRng::new(seed).array2((10, 11));
        let a = sobel_magnitude_raw(&big.slice(s![0..9, 0..10]).to_owned()).unwrap();
        let b = sobel_magnitude_raw(&big.slice(s![1..10, 1..11]).to_owned()).unwrap();
        // away from the borders, the response of the shifted crop is the shifted response
        for i in 2..8 {
            for j in 2..9 {
                prop_assert!((a[[i, j]] - b[[i - 1, j - 1]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parameter_map_edges_ignore_global_scale((k, m, n, seed) in shape(), c in 0.01f64..100.0, t in 0.0f64..=1.0) {
        prop_assume!(m >= 3 && n >= 3);
        let x = TestRng::new(seed).field(k, m, n);
        let cx = CoefficientField64::from_maps(k, x.maps() * c).unwrap();
        let a = edges_from_parameter_maps(&x, t).unwrap();
        let b = edges_from_parameter_maps(&cx, t).unwrap();
        // exact ties at the threshold can flip by one rounding step
        let flips = a.mask.iter().zip(b.mask.iter()).filter(|(p, q)| p != q).count();
        prop_assert!(flips == 0 || t == 0.0, "{flips} pixels differ");
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), sigma in 0.0f64..50.0) {
        let img = Array2::from_elem((5, 6), 100.0f64);
        let spec = NoiseSpec::new(sigma, seed).unwrap();
        let a = add_gaussian_noise(&img, &spec);
        let b = add_gaussian_noise(&img, &spec);
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn scoring_truth_against_itself_is_perfect((_, m, n, seed) in shape(), tol in 0usize..3) {
        let mut rng = TestRng::new(seed);
        let mask = Array2::from_shape_simple_fn((m, n), || rng.uniform(0.0, 1.0) < 0.3);
        let e = polyedge::EdgeMap::new(mask, 0.5);
        let s = score_edges(&e, &e, tol).unwrap();
        prop_assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn pgm_round_trip(seed in any::<u64>(), m in 1usize..9, n in 1usize..9) {
        let mut rng = TestRng::new(seed);
        let img = Array2::from_shape_simple_fn((m, n), || rng.below(256) as f64);
        let back: Image64 = decode_pgm(&encode_pgm(&img)).unwrap();
        prop_assert_eq!(back, img);
    }
}
