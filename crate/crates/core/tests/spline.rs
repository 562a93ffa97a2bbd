use proptest::prelude::*;
use stiga_core::field::evaluate_field;
use stiga_core::geometry::{EvalLevel, GeometryMap};
use stiga_core::spline::{KnotVector, SplineSpace1D, TensorSpaceTime};

/// Open knot vector with random interior breakpoints.
fn space(p: usize, cuts: &[f64]) -> SplineSpace1D {
    let mut bp = vec![0.0];
    let mut c: Vec<f64> = cuts.to_vec();
    c.sort_by(f64::total_cmp);
    c.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    bp.extend(c.into_iter().filter(|&v| v > 1e-3 && v < 1.0 - 1e-3));
    bp.push(1.0);
    SplineSpace1D::new(KnotVector::open_on_breakpoints(p, &bp).unwrap())
}

proptest! {
    #[test]
    fn partition_of_unity(p in 1usize..5, cuts in prop::collection::vec(0.0f64..1.0, 0..8), x in 0.0f64..=1.0) {
        let s = space(p, &cuts);
        let (_, d) = s.eval_ders(x, 1.min(p));
        prop_assert!((d[0].iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(d[0].iter().all(|&v| v >= -1e-15));
        if p >= 1 {
            prop_assert!(d[1].iter().sum::<f64>().abs() < 1e-10);
        }
    }

    #[test]
    fn greville_points_are_sorted_in_unit_interval(p in 1usize..5, cuts in prop::collection::vec(0.0f64..1.0, 0..8)) {
        let s = space(p, &cuts);
        let g = s.greville();
        prop_assert_eq!(g.len(), s.dimension());
        prop_assert_eq!(g[0], 0.0);
        prop_assert_eq!(*g.last().unwrap(), 1.0);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn greville_coefficients_reproduce_linear_functions(p in 1usize..5, cuts in prop::collection::vec(0.0f64..1.0, 0..8), x in 0.0f64..=1.0) {
        let s = space(p, &cuts);
        let g = s.greville();
        let (first, d) = s.eval_ders(x, 0);
        let v: f64 = d[0].iter().enumerate().map(|(a, b)| b * g[first + a]).sum();
        prop_assert!((v - x).abs() < 1e-13);
    }

    #[test]
    fn annulus_jacobian_is_positive(eta0 in 0.0f64..=1.0, eta1 in 0.0f64..=1.0) {
        let map = GeometryMap::ellipse_annulus(16, 1.0).unwrap();
        let det = map.eval(&[eta0, eta1], EvalLevel::Jacobian).unwrap().det().unwrap();
        prop_assert!(det > 0.0);
    }
}

#[test]
fn constant_time_function_has_no_initial_value() {
    // every constrained space-time function vanishes at t = 0
    let st = TensorSpaceTime::uniform(2, &[3, 2], 3, 4).unwrap();
    let map = GeometryMap::affine_box(&[1.0, 2.0], 5.0).unwrap();
    let ones = vec![1.0; st.n_dof()];
    let at0 = evaluate_field(&ones, &st, &map, &[0.3, 0.6], 0.0, false).unwrap();
    assert!(at0.value.abs() < 1e-15);
    let later = evaluate_field(&ones, &st, &map, &[0.3, 0.6], 0.9, false).unwrap();
    assert!((later.value - 1.0).abs() < 1e-13);
}

#[test]
fn colexicographic_ordering() {
    let st = TensorSpaceTime::uniform(2, &[3, 2], 2, 3).unwrap();
    let dims = st.spatial_dims();
    assert_eq!(dims, vec![5, 4]);
    assert_eq!(st.space_index(&[1, 0]), 1);
    assert_eq!(st.space_index(&[0, 1]), 5);
    assert_eq!(st.global_index(&[2, 3], 1), 2 + 5 * 3 + 20);
    for i in 0..st.n_space() {
        assert_eq!(st.space_index(&st.space_multi_index(i)), i);
    }
}
