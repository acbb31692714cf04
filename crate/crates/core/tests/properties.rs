use proptest::prelude::*;

use fedgmc::numerics::{dot, norm, seeded_rng, standard_normal_matrix, Matrix};
use fedgmc::refine::{gw_2point, gw_from_distances, refine_anchor, RefineConfig};
use fedgmc::semantic::{construct_etf, procrustes, SemanticManifold};
use fedgmc::structural::{ot_distance, sinkhorn};

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn etf_columns_are_equiangular(c in 2usize..9, extra in 0usize..6, seed in any::<u64>()) {
        let anchors = construct_etf(c, c + extra, seed).unwrap();
        let m = anchors.matrix();
        for i in 0..c {
            let a = m.column(i);
            prop_assert!((norm(&a) - 1.0).abs() < 1e-12);
            for j in i + 1..c {
                let cos = dot(&a, &m.column(j));
                prop_assert!((cos + 1.0 / (c as f64 - 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn procrustes_rotation_is_orthogonal(c in 2usize..6, extra in 0usize..4, seed in any::<u64>()) {
        let d = c + extra;
        let anchors = construct_etf(c, d, seed).unwrap();
        let mut rng = seeded_rng(seed, &[1]);
        let manifold = SemanticManifold {
            p: standard_normal_matrix(d, c, &mut rng),
            present: vec![true; c],
            counts: vec![1; c],
        };
        let r = procrustes(&manifold, &anchors).unwrap();
        let rtr = r.matrix().t_matmul(r.matrix()).unwrap();
        prop_assert!(rtr.max_abs_diff(&Matrix::identity(d)) < 1e-9);
    }

    #[test]
    fn refined_anchor_stays_on_sphere_within_step(
        delta in prop::collection::vec(-1.0f64..1.0, 4),
        v in prop::collection::vec(-5.0f64..5.0, 4),
        s in prop::collection::vec(-5.0f64..5.0, 4),
        gamma in 0.0f64..1.0,
        eta in 0.01f64..0.5,
    ) {
        prop_assume!(norm(&delta) > 1e-3);
        let delta = unit(delta);
        let cfg = RefineConfig { eta, ..RefineConfig::default() };
        let r = refine_anchor(&delta, &v, gamma, &s, &cfg).unwrap();
        prop_assert!((norm(&r.anchor) - 1.0).abs() < 1e-12);
        prop_assert!(r.chord <= eta + 1e-12);
    }

    #[test]
    fn gw_is_symmetric_nonnegative_and_zero_on_equal_spread(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let g = gw_from_distances(a, b);
        prop_assert!(g >= 0.0);
        prop_assert_eq!(g, gw_from_distances(b, a));
        prop_assert!(gw_from_distances(a, a) < 1e-12);
    }

    #[test]
    fn gw_ignores_rigid_motions(
        pts in prop::collection::vec(-3.0f64..3.0, 6),
        shift in prop::collection::vec(-3.0f64..3.0, 3),
        other in prop::collection::vec(-3.0f64..3.0, 6),
    ) {
        let a = Matrix::from_vec(2, 3, pts.clone()).unwrap();
        let moved: Vec<f64> = pts.iter().enumerate().map(|(k, x)| x + shift[k % 3]).collect();
        let moved = Matrix::from_vec(2, 3, moved).unwrap();
        let b = Matrix::from_vec(2, 3, other).unwrap();
        prop_assert!((gw_2point(&a, &b).unwrap() - gw_2point(&moved, &b).unwrap()).abs() < 1e-9);
        prop_assert!(gw_2point(&a, &moved).unwrap() < 1e-9);
    }

    #[test]
    fn ot_distance_is_a_symmetric_nonnegative_gap(
        x in prop::collection::vec(-3.0f64..3.0, 4),
        y in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let a = Matrix::from_vec(2, 2, x).unwrap();
        let b = Matrix::from_vec(2, 2, y).unwrap();
        let ab = ot_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ot_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert_eq!(ot_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn sinkhorn_rows_sum_to_one_and_dual_rises(
        b in 2usize..12,
        q in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = seeded_rng(seed, &[2]);
        let cost = standard_normal_matrix(b, q, &mut rng).map(f64::abs);
        let m = sinkhorn(&cost, 0.5, 500, 1e-9).unwrap();
        for r in 0..b {
            let row = m.f.row(r);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for w in m.stats.dual_objective.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        if m.stats.converged {
            for j in 0..q {
                let col: f64 = m.f.column(j).iter().sum();
                prop_assert!((col - b as f64 / q as f64).abs() < 1e-6 * b as f64);
            }
        }
    }
}
