//! Structured operators against dense brute-force counterparts. Every
//! check returns the largest relative deviation it found.

use nalgebra::{DMatrix, DVector};
use stiga_core::assembly::{spatial_operators, time_matrices, KroneckerOperator, SpaceTimeAssembler};
use stiga_core::field::evaluate_field;
use stiga_core::geometry::GeometryMap;
use stiga_core::linalg::{solve_w_dense, solve_w_system, FastDiagPreconditioner, MassSolver, C64};
use stiga_core::spline::{SplineSpace1D, TensorSpaceTime};
use stiga_core::su_stab::{compute_tau, lowrank_factorize, Stabilizer, ThetaTensor};
use stiga_core::Parameters;

use super::{dense_ders, max_rel, max_rel_vec, rule, scrambled, Brute};

const EXTENTS: [f64; 2] = [2.0, 0.5];
const TF: f64 = 3.0;

fn setup(p: usize) -> (TensorSpaceTime, GeometryMap) {
    let st = TensorSpaceTime::uniform(p, &[3, 2], p, 3).unwrap();
    (st, GeometryMap::affine_box(&EXTENTS, TF).unwrap())
}

fn params() -> Parameters {
    Parameters {
        c_m: 1.3,
        d: 0.7,
        ..Parameters::default()
    }
}

fn base_operator(st: &TensorSpaceTime, map: &GeometryMap, prm: &Parameters) -> KroneckerOperator {
    let sops = spatial_operators(st.spatial(), map).unwrap();
    let tm = time_matrices(st.time(), TF);
    let mut op = KroneckerOperator::new(st.n_time(), st.n_space());
    op.push_operator(prm.c_m, &tm.advection, &sops.mass).unwrap();
    op.push_operator(prm.d, &tm.mass, &sops.stiffness).unwrap();
    op
}

/// `C_m W_t ⊗ M_s + D M_t ⊗ K_s` against `∫∫ C_m ∂_t φ_j φ_i + D ∇φ_j · ∇φ_i`.
pub fn space_time_operator() -> f64 {
    let prm = params();
    [1, 2]
        .into_iter()
        .map(|p| {
            let (st, map) = setup(p);
            let op = base_operator(&st, &map, &prm);
            let brute = Brute::new(&st, &EXTENTS, TF, 6, false).matrix(1, |pt, i, j| {
                let grad: f64 = pt.grad.iter().map(|g| g[i] * g[j]).sum();
                prm.c_m * pt.phi[1][j] * pt.phi[0][i] + prm.d * grad
            });
            max_rel(&op.to_dense(), &brute)
        })
        .fold(0.0, f64::max)
}

/// Matrix-free product and sparse assembly against the dense operator.
pub fn matvec() -> f64 {
    let (st, map) = setup(2);
    let prm = params();
    let mut op = base_operator(&st, &map, &prm);
    let asm = SpaceTimeAssembler::new(&st, &map, false).unwrap();
    let n = st.n_dof();
    let u = scrambled(n, 1, -0.2, 1.1);
    let w = scrambled(n, 2, 0.0, 0.3);
    op.set_correction(asm.reaction_mass(&u, &w, |a, b| prm.reaction(a, b)).unwrap()).unwrap();
    let x = scrambled(n, 3, -1.0, 1.0);
    let dense = op.to_dense() * DVector::from_column_slice(&x);
    let csr = op.to_csr(&asm.layout).unwrap();
    max_rel_vec(&op.apply(&x).unwrap(), dense.as_slice()).max(max_rel(&csr.to_dense(), &op.to_dense()))
}

/// `M_R`, on the assembler's own Gauss rule: the integrand is not a
/// polynomial of low enough degree for any rule to be exact.
pub fn reaction_mass() -> f64 {
    let (st, map) = setup(2);
    let prm = params();
    let n = st.n_dof();
    let u = scrambled(n, 4, -0.2, 1.1);
    let w = scrambled(n, 5, 0.0, 0.3);
    let asm = SpaceTimeAssembler::new(&st, &map, false).unwrap();
    let mr = asm.reaction_mass(&u, &w, |a, b| prm.reaction(a, b)).unwrap().to_dense();
    let brute = Brute::new(&st, &EXTENTS, TF, 3, false).weighted_matrix(
        0,
        |pt| {
            let uh = evaluate_field(&u, &st, &map, pt.eta, pt.s, false).unwrap().value;
            let wh = evaluate_field(&w, &st, &map, pt.eta, pt.s, false).unwrap().value;
            prm.reaction(uh, wh)
        },
        |pt, c, i, j| c * pt.phi[0][i] * pt.phi[0][j],
    );
    max_rel(&mr, &brute)
}

pub fn load_vector() -> f64 {
    let (st, map) = setup(2);
    let asm = SpaceTimeAssembler::new(&st, &map, false).unwrap();
    let f = |x: &[f64], _eta: &[f64], t: f64| (x[0] * 1.7).sin() * (1.0 + x[1]) * (-t).exp();
    let load = asm.quad.source_vector(&f);
    let brute = Brute::new(&st, &EXTENTS, TF, 3, false).vector(|pt, i| f(pt.x, pt.eta, pt.t) * pt.phi[0][i]);
    max_rel_vec(&load, &brute)
}

/// Low-rank stabilization terms against `∫∫ C_m Θ Σ_k τ_k ∂_t^k φ_j ∂_t^k φ_i`
/// with `Θ` the interpolated full tensor.
pub fn stabilization() -> f64 {
    [2, 3]
        .into_iter()
        .map(|p| {
            let (st, map) = setup(p);
            let (nt, ns) = (st.n_time(), st.n_space());
            let values = DMatrix::from_column_slice(nt, ns, &scrambled(nt * ns, 6, 0.0, 1.0));
            let theta = ThetaTensor { values };
            let lr = lowrank_factorize(&theta.values, 1e-15).unwrap();
            let stab = Stabilizer::new(&st, &map).unwrap();
            let c_m = 1.3;
            let mut op = KroneckerOperator::new(nt, ns);
            stab.assemble(&lr).push_terms(&mut op, c_m).unwrap();
            let tau = stab.tau();
            let brute = Brute::new(&st, &EXTENTS, TF, p + 3, true).weighted_matrix(
                p,
                |pt| {
                    let th = c_m * theta.interpolate(&st, pt.eta, pt.s);
                    (1..=p).map(|k| th * tau.eval(k, pt.t, TF)).collect::<Vec<_>>()
                },
                |pt, c, i, j| (1..=p).map(|k| c[k - 1] * pt.phi[k][i] * pt.phi[k][j]).sum(),
            );
            max_rel(&op.to_dense(), &brute)
        })
        .fold(0.0, f64::max)
}

/// On a box the fast-diagonalization operator is the system operator
/// with constant reaction, and its solve inverts it.
pub fn fast_diagonalization() -> f64 {
    let (st, map) = setup(2);
    let prm = params();
    let r = prm.a * prm.c1;
    let sops = spatial_operators(st.spatial(), &map).unwrap();
    let tm = time_matrices(st.time(), TF);
    // det J / e_l^2 = e_other / e_l splits as (K_l / e_l) ⊗ (e_other M_other)
    let mf: Vec<DMatrix<f64>> = (0..2).map(|l| &sops.parametric_mass[l] * EXTENTS[l]).collect();
    let kf: Vec<DMatrix<f64>> = (0..2).map(|l| &sops.parametric_stiffness[l] / EXTENTS[l]).collect();
    let pc = FastDiagPreconditioner::new(&mf, &kf, &tm.advection, &tm.mass, prm.c_m, prm.d, r).unwrap();
    let mut op = base_operator(&st, &map, &prm);
    op.push_operator(r, &tm.mass, &sops.mass).unwrap();
    let a = op.to_dense();
    let b = scrambled(st.n_dof(), 7, -1.0, 1.0);
    let x = pc.apply_vec(&b).unwrap();
    let ax = &a * DVector::from_column_slice(&x);
    max_rel(&pc.dense_operator(), &a).max(max_rel_vec(ax.as_slice(), &b))
}

/// Arrowhead Schur-complement solves against the dense blocks.
pub fn arrowhead() -> f64 {
    let (st, _) = setup(3);
    let tm = time_matrices(st.time(), TF);
    let m = [DMatrix::from_diagonal_element(2, 2, 1.0)];
    let k = [DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])];
    let pc = FastDiagPreconditioner::new(&m, &k, &tm.advection, &tm.mass, 1.0, 0.3, 0.1).unwrap();
    (0..pc.n_space())
        .map(|s| {
            let block = pc.block(s);
            let dense = block.to_dense();
            let rhs: Vec<C64> = scrambled(dense.nrows(), 8 + s as u64, -1.0, 1.0)
                .into_iter()
                .map(|v| C64::new(v, -0.5 * v))
                .collect();
            let mut y = rhs.clone();
            block.solve(&mut y);
            let back = &dense * DVector::from_vec(y);
            let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            back.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max)
}

/// Recovery-variable solve by the vec trick against `(E ⊗ M_s)^{-1} g`.
pub fn recovery_system() -> f64 {
    let st = TensorSpaceTime::uniform(2, &[3, 3], 2, 3).unwrap();
    let map = GeometryMap::ellipse_annulus(8, TF).unwrap();
    let sops = spatial_operators(st.spatial(), &map).unwrap();
    let tm = time_matrices(st.time(), TF);
    let prm = params();
    let solver = MassSolver::new(&sops.mass, &sops.parametric_mass, 1e-13).unwrap();
    let g = scrambled(st.n_dof(), 9, -1.0, 1.0);
    let fast = solve_w_system(&tm.advection, &tm.mass, &sops.mass, &solver, prm.b, prm.d_e, &g).unwrap();
    let dense = solve_w_dense(&tm.advection, &tm.mass, &sops.mass.to_dense(), prm.b, prm.d_e, &g).unwrap();
    max_rel_vec(&fast.w, &dense)
}

/// `∫ b'_{i+ℓ} b_i + Σ_k ∫ σ_k b^(k)_{i+ℓ} b^(k)_i` over the constrained
/// basis, divided by the largest `|∫ b'_{i+ℓ} b_i|`.
pub fn tau_constraints(p: usize, m: usize) -> f64 {
    let s = SplineSpace1D::uniform(p, m).unwrap();
    let tau = compute_tau(&s).unwrap();
    let n = s.dimension();
    let pts = rule(s.breakpoints(), 2 * p + 2);
    let mut adv = DMatrix::<f64>::zeros(n, n);
    let mut stab = DMatrix::<f64>::zeros(n, n);
    for &(x, w) in &pts {
        let d = dense_ders(&s, x, p);
        let sig: Vec<f64> = (1..=p).map(|k| tau.eval_parametric(k, x)).collect();
        for i in 0..n {
            for j in 0..n {
                adv[(i, j)] += w * d[1][j] * d[0][i];
                stab[(i, j)] += w * (1..=p).map(|k| sig[k - 1] * d[k][j] * d[k][i]).sum::<f64>();
            }
        }
    }
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in 1..n - 1 {
        for l in 1..=p.min(n - 1 - i) {
            worst = worst.max((adv[(i, i + l)] + stab[(i, i + l)]).abs());
            scale = scale.max(adv[(i, i + l)].abs());
        }
    }
    worst / scale
}

/// Every check with its name.
pub fn all() -> Vec<(&'static str, f64)> {
    vec![
        ("space-time operator", space_time_operator()),
        ("matvec", matvec()),
        ("reaction mass", reaction_mass()),
        ("load vector", load_vector()),
        ("stabilization", stabilization()),
        ("fast diagonalization", fast_diagonalization()),
        ("arrowhead", arrowhead()),
        ("recovery system", recovery_system()),
    ]
}
