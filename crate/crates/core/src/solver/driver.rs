use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::assembly::{spatial_operators, time_matrices, KroneckerOperator, SpaceTimeAssembler, SpatialOperators};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::linalg::{
    gmres, solve_w_system, DirectSolver, FastDiagPreconditioner, IdentityPreconditioner, MassSolver, Preconditioner,
};
use crate::params::Parameters;
use crate::spline::TensorSpaceTime;
use crate::su_stab::{compute_theta, lowrank_factorize, residual_summary, Stabilizer, ThetaTensor};

/// Above this many unknowns `Auto` switches from sparse LU to GMRES.
pub const DIRECT_DOF_LIMIT: usize = 20_000;

/// Source `f(x, η, t)`: physical point, its parametric preimage, physical time.
pub type Source = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct MonodomainProblem {
    pub params: Parameters,
    pub geometry: GeometryMap,
    pub space: TensorSpaceTime,
    pub source: Source,
}

impl std::fmt::Debug for MonodomainProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MonodomainProblem")
            .field("params", &self.params)
            .field("final_time", &self.geometry.final_time())
            .field("n_dof", &self.space.n_dof())
            .finish()
    }
}

impl MonodomainProblem {
    pub fn final_time(&self) -> f64 {
        self.geometry.final_time()
    }

    fn validate(&self) -> Result<()> {
        if self.geometry.dim() != self.space.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.geometry.dim(),
                actual: self.space.dim(),
            });
        }
        let p = &self.params;
        for (name, v) in [("C_m", p.c_m), ("D", p.d), ("final time", self.final_time())] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("a", p.a), ("b", p.b), ("c1", p.c1), ("c2", p.c2), ("d_e", p.d_e)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSource {
    /// Θ from the strong residual of the current iterate.
    Residual,
    /// Θ fixed to a constant; `Constant(0.0)` wires the stabilization in
    /// but leaves it inactive.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stabilization {
    Off,
    SplineUpwind { epsilon: f64, theta: ThetaSource },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearSolverChoice {
    Auto,
    Direct,
    Iterative { tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    pub alpha: f64,
    pub delta: f64,
    pub max_iterations: usize,
    pub stabilization: Stabilization,
    pub linear_solver: LinearSolverChoice,
    /// Keep `w ≡ 0` and skip the recovery system.
    pub freeze_recovery: bool,
    pub krylov_max_iterations: usize,
    /// Relative tolerance of the PCG mass solves.
    pub mass_tolerance: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            delta: 1e-4,
            max_iterations: 500,
            stabilization: Stabilization::SplineUpwind {
                epsilon: 0.1,
                theta: ThetaSource::Residual,
            },
            linear_solver: LinearSolverChoice::Auto,
            freeze_recovery: false,
            krylov_max_iterations: 2000,
            mass_tolerance: 1e-10,
        }
    }
}

impl FixedPointConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("relaxation {} outside (0, 1]", self.alpha)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("stopping tolerance {} must be positive", self.delta)));
        }
        if let Stabilization::SplineUpwind { epsilon, .. } = self.stabilization {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(Error::InvalidParameter(format!("low-rank tolerance {epsilon} outside (0, 1)")));
            }
        }
        if let LinearSolverChoice::Iterative { tol } = self.linear_solver {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!("linear tolerance {tol} must be positive")));
            }
        }
        Ok(())
    }
}

/// Diagnostics of one fixed-point iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub increment: f64,
    /// 0 for direct solves.
    pub gmres_iterations: usize,
    pub pcg_average: f64,
    pub theta_rank: usize,
    pub theta_max: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Θ of the last stabilized iteration.
    pub theta: Option<ThetaTensor>,
    pub used_direct: bool,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn increments(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.increment).collect()
    }

    pub fn average_gmres(&self) -> f64 {
        mean(self.history.iter().map(|r| r.gmres_iterations as f64))
    }

    pub fn average_pcg(&self) -> f64 {
        mean(self.history.iter().map(|r| r.pcg_average))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Univariate factors for the fast-diagonalization preconditioner: the
/// parametric ones, scaled so that `⊗ M_l` carries the mean of `det J` and
/// the `l`-th stiffness term the mean of `det J (J^{-1}J^{-ᵀ})_{ll}`. The
/// means are exact for axis-aligned scalings, where the preconditioner then
/// equals the operator.
fn preconditioner_factors(ops: &SpatialOperators, map: &GeometryMap) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let (det, diag) = map.mean_metric()?;
    let d = diag.len() as f64;
    let m_scale = det.powf(1.0 / d);
    let k_base = det.powf((d - 1.0) / d);
    Ok((
        ops.parametric_mass.iter().map(|m| m * m_scale).collect(),
        ops.parametric_stiffness.iter().zip(&diag).map(|(k, g)| k * (*g / k_base)).collect(),
    ))
}

enum LinearBackend {
    Direct(Box<DirectSolver>),
    Iterative {
        tol: f64,
        precond: Option<Box<FastDiagPreconditioner>>,
    },
}

pub fn fixed_point_solve(problem: &MonodomainProblem, config: &FixedPointConfig) -> Result<SolveResult> {
    problem.validate()?;
    config.validate()?;
    let start = Instant::now();
    let st = &problem.space;
    let map = &problem.geometry;
    let params = problem.params;
    let final_time = problem.final_time();
    let n = st.n_dof();
    let (nt, ns) = (st.n_time(), st.n_space());

    let sops = spatial_operators(st.spatial(), map)?;
    let tm = time_matrices(st.time(), final_time);
    let residual_theta = matches!(
        config.stabilization,
        Stabilization::SplineUpwind {
            theta: ThetaSource::Residual,
            ..
        }
    );
    let assembler = SpaceTimeAssembler::new(st, map, residual_theta)?;
    let source: &crate::assembly::SourceFn = &*problem.source;
    let rhs = assembler.quad.source_vector(source);
    let stabilizer = match config.stabilization {
        Stabilization::SplineUpwind { .. } => Some(Stabilizer::new(st, map)?),
        Stabilization::Off => None,
    };
    if let Some(s) = &stabilizer {
        log::debug!("min τ coefficient {:e}", s.tau().min_coefficient());
    }

    let mut base = KroneckerOperator::new(nt, ns);
    base.push_operator(params.c_m, &tm.advection, &sops.mass)?;
    base.push_operator(params.d, &tm.mass, &sops.stiffness)?;
    let mut coupling = KroneckerOperator::new(nt, ns);
    coupling.push_operator(params.b, &tm.mass, &sops.mass)?;
    let mass_solver = MassSolver::new(&sops.mass, &sops.parametric_mass, config.mass_tolerance)?;

    let use_direct = match config.linear_solver {
        LinearSolverChoice::Direct => true,
        LinearSolverChoice::Iterative { .. } => false,
        LinearSolverChoice::Auto => n <= DIRECT_DOF_LIMIT,
    };
    let mut backend = if use_direct {
        LinearBackend::Direct(Box::default())
    } else {
        let tol = match config.linear_solver {
            LinearSolverChoice::Iterative { tol } => tol,
            _ => 1e-8,
        };
        let (mf, kf) = preconditioner_factors(&sops, map)?;
        let precond = match FastDiagPreconditioner::new(&mf, &kf, &tm.advection, &tm.mass, params.c_m, params.d, params.a * params.c1) {
            Ok(p) => Some(Box::new(p)),
            Err(e @ (Error::DefectivePencil(_) | Error::NotPositiveDefinite)) => {
                log::warn!("{e}; solving without preconditioner");
                None
            }
            Err(e) => return Err(e),
        };
        LinearBackend::Iterative { tol, precond }
    };

    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut history = Vec::new();
    let mut theta_out = None;
    for k in 0..config.max_iterations {
        let mr = assembler.reaction_mass(&u, &w, |a, b| params.reaction(a, b))?;
        let mut op = base.clone();
        op.set_correction(mr)?;
        let (mut rank, mut tmax) = (0, 0.0);
        if let (Some(stab), Stabilization::SplineUpwind { epsilon, theta }) = (&stabilizer, config.stabilization) {
            let th = match theta {
                ThetaSource::Residual => {
                    let summary = residual_summary(&assembler.quad, st, &params, &u, &w, source)?;
                    compute_theta(st, &params, final_time, &summary)
                }
                ThetaSource::Constant(c) => ThetaTensor {
                    values: DMatrix::from_element(nt, ns, c),
                },
            };
            let lr = lowrank_factorize(&th.values, epsilon)?;
            rank = lr.rank();
            tmax = th.values.amax();
            stab.assemble(&lr).push_terms(&mut op, params.c_m)?;
            theta_out = Some(th);
        }

        let (u_new, gm_its) = match &mut backend {
            LinearBackend::Direct(solver) => {
                let a = op.to_csr(&assembler.layout)?;
                solver.factor(&a)?;
                (solver.solve(&rhs)?, 0)
            }
            LinearBackend::Iterative { tol, precond } => {
                let pc: &dyn Preconditioner = match precond.as_deref() {
                    Some(p) => p,
                    None => &IdentityPreconditioner,
                };
                let out = gmres(&op, &rhs, pc, *tol, config.krylov_max_iterations, Some(&u))?;
                (out.x, out.iterations)
            }
        };

        let (w_new, pcg_avg) = if config.freeze_recovery {
            (vec![0.0; n], 0.0)
        } else {
            let g = coupling.apply(&u)?;
            let sol = solve_w_system(&tm.advection, &tm.mass, &sops.mass, &mass_solver, params.b, params.d_e, &g)?;
            let avg = mean(sol.pcg_iterations.iter().map(|&i| i as f64));
            (sol.w, avg)
        };

        let alpha = config.alpha;
        let mut inc = 0.0f64;
        for (ui, un) in u.iter_mut().zip(&u_new) {
            let next = alpha * un + (1.0 - alpha) * *ui;
            inc = inc.max((next - *ui).abs());
            *ui = next;
        }
        for (wi, wn) in w.iter_mut().zip(&w_new) {
            *wi = alpha * wn + (1.0 - alpha) * *wi;
        }
        log::info!("fixed point {}: increment {inc:e}, GMRES {gm_its}, rank Θ {rank}, max Θ {tmax:.3e}", k + 1);
        history.push(IterationRecord {
            increment: inc,
            gmres_iterations: gm_its,
            pcg_average: pcg_avg,
            theta_rank: rank,
            theta_max: tmax,
        });
        if !inc.is_finite() {
            return Err(Error::NumericalConsistency(format!("non-finite increment at iteration {}", k + 1)));
        }
        if inc <= config.delta {
            return Ok(SolveResult {
                u,
                w,
                iterations: k + 1,
                history,
                theta: theta_out,
                used_direct: use_direct,
                wall_time: start.elapsed(),
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        last: history.last().map_or(f64::NAN, |r| r.increment),
        increments: history.iter().map(|r| r.increment).collect(),
    })
}
