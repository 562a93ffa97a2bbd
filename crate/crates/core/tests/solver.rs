use std::sync::Arc;

use stiga_core::geometry::GeometryMap;
use stiga_core::solver::{
    fixed_point_solve, FixedPointConfig, LinearSolverChoice, MonodomainProblem, Source, Stabilization, ThetaSource,
};
use stiga_core::spline::TensorSpaceTime;
use stiga_core::Parameters;

fn pulse() -> Source {
    Arc::new(|x: &[f64], _: &[f64], t: f64| {
        let r2 = (x[0] - 0.3).powi(2) + (x[1] - 0.1).powi(2);
        if (1.0..3.0).contains(&t) {
            (-r2 / 0.01).exp()
        } else {
            0.0
        }
    })
}

fn problem(source: Source, params: Parameters) -> MonodomainProblem {
    MonodomainProblem {
        params,
        geometry: GeometryMap::ellipse_annulus(8, 10.0).unwrap(),
        space: TensorSpaceTime::uniform(2, &[8, 3], 2, 6).unwrap(),
        source,
    }
}

fn params() -> Parameters {
    Parameters {
        d: 1e-3,
        ..Parameters::default()
    }
}

fn su(theta: ThetaSource) -> Stabilization {
    Stabilization::SplineUpwind { epsilon: 0.1, theta }
}

#[test]
fn zero_source_gives_zero_solution() {
    let pb = problem(Arc::new(|_: &[f64], _: &[f64], _| 0.0), params());
    for stabilization in [Stabilization::Off, su(ThetaSource::Residual)] {
        let r = fixed_point_solve(&pb, &FixedPointConfig { stabilization, ..Default::default() }).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.u.iter().chain(&r.w).all(|&v| v == 0.0));
    }
}

#[test]
fn inactive_stabilization_equals_galerkin() {
    let pb = problem(pulse(), params());
    let base = FixedPointConfig {
        delta: 1e-8,
        ..Default::default()
    };
    let g = fixed_point_solve(&pb, &FixedPointConfig { stabilization: Stabilization::Off, ..base }).unwrap();
    let s = fixed_point_solve(&pb, &FixedPointConfig { stabilization: su(ThetaSource::Constant(0.0)), ..base }).unwrap();
    let diff = g.u.iter().zip(&s.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-8, "{diff:e}");
    assert_eq!(g.iterations, s.iterations);
}

#[test]
fn linear_problem_converges_in_two_iterations() {
    let prm = Parameters {
        c1: 0.0,
        c2: 0.0,
        ..params()
    };
    let pb = problem(pulse(), prm);
    for stabilization in [Stabilization::Off, su(ThetaSource::Constant(0.5))] {
        let cfg = FixedPointConfig {
            alpha: 1.0,
            delta: 1e-10,
            stabilization,
            ..Default::default()
        };
        let r = fixed_point_solve(&pb, &cfg).unwrap();
        assert!(r.iterations <= 2, "{} iterations", r.iterations);
    }
}

#[test]
fn direct_and_iterative_solvers_agree() {
    let pb = problem(pulse(), params());
    let run = |linear_solver| {
        let cfg = FixedPointConfig {
            delta: 1e-9,
            linear_solver,
            ..Default::default()
        };
        fixed_point_solve(&pb, &cfg).unwrap()
    };
    let d = run(LinearSolverChoice::Direct);
    let i = run(LinearSolverChoice::Iterative { tol: 1e-12 });
    assert!(d.used_direct && !i.used_direct);
    assert!(i.history.iter().all(|h| h.gmres_iterations > 0));
    let diff = d.u.iter().zip(&i.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-7, "{diff:e}");
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let pb = problem(pulse(), params());
    let cfg = FixedPointConfig::default();
    let a = fixed_point_solve(&pb, &cfg).unwrap();
    let b = fixed_point_solve(&pb, &cfg).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.w, b.w);
    assert_eq!(a.increments(), b.increments());
}

#[test]
fn non_convergence_is_reported() {
    let pb = problem(pulse(), params());
    let cfg = FixedPointConfig {
        max_iterations: 2,
        delta: 1e-14,
        ..Default::default()
    };
    match fixed_point_solve(&pb, &cfg) {
        Err(stiga_core::Error::NonConvergence { iterations, increments, .. }) => {
            assert_eq!(iterations, 2);
            assert_eq!(increments.len(), 2);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
}

#[test]
fn invalid_configuration_is_rejected() {
    let pb = problem(pulse(), params());
    for cfg in [
        FixedPointConfig { alpha: 0.0, ..Default::default() },
        FixedPointConfig { delta: -1.0, ..Default::default() },
        FixedPointConfig { stabilization: Stabilization::SplineUpwind { epsilon: 1.5, theta: ThetaSource::Residual }, ..Default::default() },
    ] {
        assert!(matches!(fixed_point_solve(&pb, &cfg), Err(stiga_core::Error::InvalidParameter(_))));
    }
    let mut bad = pb.clone();
    bad.params.d = -1.0;
    assert!(fixed_point_solve(&bad, &FixedPointConfig::default()).is_err());
}
