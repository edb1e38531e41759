#![allow(dead_code)]

use graphon_lqr::graphon::{step_from_matrix, DictionaryGraphon, Graphon, GridFunction, TrigFunction};
use graphon_lqr::riccati::{project_model, CouplingModel};
use graphon_lqr::sim::Trajectory;
use graphon_lqr::subspace::{decompose, project_function};
use graphon_lqr::subspace::SubspaceBasis;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale))
}

/// `n × n` symmetric positive definite with eigenvalues roughly in `[floor, floor + scale²n]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64, scale: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n, scale);
    &m * m.transpose() + DMatrix::identity(n, n) * floor
}

/// `N × d` with orthonormal columns in the Euclidean inner product.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, size: usize, d: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, size, d, 1.0);
    m.qr().q().columns(0, d).into_owned()
}

/// Step graphon `W = N·U diag(μ) Uᵀ`, symmetrized exactly.
pub fn rank_d_step(u: &DMatrix<f64>, mu: &[f64]) -> Graphon {
    let size = u.nrows();
    let k = u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(mu)) * u.transpose();
    let w = (&k + k.transpose()) * (0.5 * size as f64);
    let bound = w.amax();
    step_from_matrix(w, bound).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, size: usize, n: usize) -> GridFunction {
    GridFunction::new(random_matrix(rng, size, n, 5.0)).unwrap()
}

/// A model whose four couplings are exact rank-`d` step graphons sharing the
/// eigenbasis returned alongside it.
pub fn exact_instance(seed: u64, size: usize, n: usize, d: usize) -> (CouplingModel, SubspaceBasis, GridFunction) {
    let mut r = rng(seed);
    let u = random_orthonormal(&mut r, size, d);
    let mut spectrum = |nonneg: bool| -> Vec<f64> {
        (0..d)
            .map(|_| if nonneg { r.random_range(0.1..1.0) } else { r.random_range(-1.0..1.0) })
            .collect()
    };
    let (ma, mb, mq, mqt) = (spectrum(false), spectrum(false), spectrum(true), spectrum(true));
    let model = CouplingModel {
        la: random_matrix(&mut r, n, n, 1.0),
        da: random_matrix(&mut r, n, n, 1.0),
        lb: random_matrix(&mut r, n, n, 1.0) + DMatrix::identity(n, n),
        db: random_matrix(&mut r, n, n, 0.5),
        lq: random_spd(&mut r, n, 0.5, 0.7),
        dq: random_spd(&mut r, n, 0.0, 0.5),
        lqt: random_spd(&mut r, n, 0.5, 0.7),
        dqt: random_spd(&mut r, n, 0.0, 0.5),
        a: rank_d_step(&u, &ma),
        b: rank_d_step(&u, &mb),
        q: rank_d_step(&u, &mq),
        qt: rank_d_step(&u, &mqt),
        horizon: 1.0,
    };
    let basis = SubspaceBasis::from_grid(&u * (size as f64).sqrt()).unwrap();
    let x0 = random_state(&mut r, size, n);
    (model, basis, x0)
}

pub fn sec5a_dict(coeffs: [f64; 4]) -> Graphon {
    DictionaryGraphon::new(
        vec![TrigFunction::Sin(1), TrigFunction::Cos(1)],
        DMatrix::from_row_slice(2, 2, &coeffs),
    )
    .unwrap()
    .into()
}

pub fn sec5a_model() -> CouplingModel {
    CouplingModel::scalar(
        [2.0, 1.0, 1.2, 1.0, 1.0, 1.0, 2.0, 1.0],
        sec5a_dict([1.0, 0.5, 0.5, 1.0]),
        sec5a_dict([-0.5, 0.0, 0.0, 0.5]),
        sec5a_dict([0.5, 0.0, 0.0, 0.0]),
        sec5a_dict([0.0, 0.0, 0.0, 0.5]),
        1.0,
    )
}

pub fn sec5a_basis() -> SubspaceBasis {
    SubspaceBasis::from_dictionary(vec![TrigFunction::Sin(1), TrigFunction::Cos(1)]).unwrap()
}

pub fn sbm_probs() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[0.25, 0.05, 0.02, 0.05, 0.35, 0.07, 0.02, 0.07, 0.40])
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `(J_𝒮, J_𝒮⊥)` of a trajectory, for cost couplings that are low-rank in
/// `basis`: projected weights on `x^p`, local weights on the remainder, and
/// the control energy split orthogonally.
pub fn split_cost(model: &CouplingModel, basis: &SubspaceBasis, traj: &Trajectory) -> (f64, f64) {
    let projected = project_model(model, basis).unwrap();
    let parts = |x: &GridFunction, qbar: &DMatrix<f64>, local: &DMatrix<f64>| {
        let xp = project_function(x, basis).unwrap();
        let rest = decompose(x, basis).unwrap().auxiliary_part;
        (xp.coords().dot(&(qbar * xp.coords())), rest.inner(&rest.map_local(local).unwrap()).unwrap())
    };
    let running = |k: usize| {
        let (s, a) = parts(&traj.states()[k], &projected.qbar, &model.lq);
        let u = &traj.controls()[k];
        let up = project_function(u, basis).unwrap().coords().norm_squared();
        (s + up, a + u.norm_squared() - up)
    };
    let (mut js, mut jr) = (0.0, 0.0);
    let times = traj.time_grid();
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let ((s0, a0), (s1, a1)) = (running(k), running(k + 1));
        js += 0.5 * h * (s0 + s1);
        jr += 0.5 * h * (a0 + a1);
    }
    let (s, a) = parts(traj.terminal_state(), &projected.qtbar, &model.lqt);
    (js + s, jr + a)
}
