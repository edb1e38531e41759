//! Projected system assembly and finite-horizon matrix Riccati solves.
//!
//! All Riccati equations here have the form
//!
//! ```text
//! −Π̇ = AᵀΠ + ΠA − ΠSΠ + Q,    Π(T) = Q_T
//! ```
//!
//! and are integrated backward from `T` with classical RK4 on a uniform grid
//! of `M` steps. Each step is followed by `Π ← (Π + Πᵀ)/2`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graphon::Graphon;
use crate::io::{fmt_f64, write_rows};
use crate::linalg::{asymmetry, flatten_row_major, min_eigenvalue, symmetrize};
use crate::subspace::{certify, project_operator, Coupling, SubspaceBasis, CERTIFICATE_TOL};

/// Default number of time steps.
pub const DEFAULT_STEPS: usize = 200;
/// Symmetry tolerance (relative to `max(‖·‖, 1)`) for weight matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Most negative eigenvalue (relative to `max(‖·‖, 1)`) a PSD weight may have.
pub const PSD_TOL: f64 = 1e-8;

/// Local parameter matrices, coupling graphons and horizon of a graphon LQR
/// problem:
///
/// `ẋ = [L_a𝕀 + D_a𝐀]x + [L_b𝕀 + D_b𝐁]u`,
/// `ℚ = L_q𝕀 + D_q𝐐`, `ℚ_T = L_qT𝕀 + D_qT𝐐_T`.
#[derive(Clone, Debug)]
pub struct CouplingModel {
    pub la: DMatrix<f64>,
    pub da: DMatrix<f64>,
    pub lb: DMatrix<f64>,
    pub db: DMatrix<f64>,
    pub lq: DMatrix<f64>,
    pub dq: DMatrix<f64>,
    pub lqt: DMatrix<f64>,
    pub dqt: DMatrix<f64>,
    pub a: Graphon,
    pub b: Graphon,
    pub q: Graphon,
    pub qt: Graphon,
    pub horizon: f64,
}

impl CouplingModel {
    /// Model with scalar local parameters (`n = 1`).
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(
        [la, da, lb, db, lq, dq, lqt, dqt]: [f64; 8],
        a: Graphon,
        b: Graphon,
        q: Graphon,
        qt: Graphon,
        horizon: f64,
    ) -> Self {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        Self {
            la: s(la),
            da: s(da),
            lb: s(lb),
            db: s(db),
            lq: s(lq),
            dq: s(dq),
            lqt: s(lqt),
            dqt: s(dqt),
            a,
            b,
            q,
            qt,
            horizon,
        }
    }

    pub fn dim(&self) -> usize {
        self.la.nrows()
    }

    pub fn locals(&self) -> [(&'static str, &DMatrix<f64>); 8] {
        [
            ("L_a", &self.la),
            ("D_a", &self.da),
            ("L_b", &self.lb),
            ("D_b", &self.db),
            ("L_q", &self.lq),
            ("D_q", &self.dq),
            ("L_qT", &self.lqt),
            ("D_qT", &self.dqt),
        ]
    }

    pub fn operators(&self) -> [(&'static str, &Graphon); 4] {
        [("A", &self.a), ("B", &self.b), ("Q", &self.q), ("Q_T", &self.qt)]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Dimension("state dimension must be positive".into()));
        }
        for (name, m) in self.locals() {
            if m.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Construction(format!("{name} has non-finite entries")));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Construction(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.grid_size()?;
        Ok(())
    }

    /// The common resolution of the step-graphon couplings, if any.
    pub fn grid_size(&self) -> Result<Option<usize>> {
        let mut size = None;
        for (name, g) in self.operators() {
            if let Some(s) = g.grid_size() {
                match size {
                    None => size = Some(s),
                    Some(prev) if prev != s => {
                        return Err(Error::Dimension(format!(
                            "coupling {name} has {s} intervals, others have {prev}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(size)
    }
}

/// `Ā = I⊗L_a + A⊗D_a`, `B̄ = I⊗L_b + B⊗D_b`, `Q̄ = I⊗L_q + Q⊗D_q`,
/// `Q̄_T = I⊗L_qT + Q_T⊗D_qT`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedModel {
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub qbar: DMatrix<f64>,
    pub qtbar: DMatrix<f64>,
}

/// Projects a model onto `basis` without certifying invariance.
pub fn project_model(model: &CouplingModel, basis: &SubspaceBasis) -> Result<ProjectedModel> {
    model.validate()?;
    let assemble = |l: &DMatrix<f64>, d: &DMatrix<f64>, g: &Graphon| -> Result<DMatrix<f64>> {
        Ok(project_operator(l, Coupling::Identity, basis)? + project_operator(d, Coupling::Kernel(g), basis)?)
    };
    let projected = ProjectedModel {
        abar: assemble(&model.la, &model.da, &model.a)?,
        bbar: assemble(&model.lb, &model.db, &model.b)?,
        qbar: assemble(&model.lq, &model.dq, &model.q)?,
        qtbar: assemble(&model.lqt, &model.dqt, &model.qt)?,
    };
    require_weight("Q̄", &projected.qbar)?;
    require_weight("Q̄_T", &projected.qtbar)?;
    Ok(projected)
}

/// Assembles the projected problem after certifying that `basis` spans an
/// invariant subspace of all four couplings.
pub fn assemble_projected(model: &CouplingModel, basis: &SubspaceBasis) -> Result<ProjectedModel> {
    model.validate()?;
    let residuals = certify(&model.operators(), basis, CERTIFICATE_TOL)?;
    if residuals.iter().any(|r| !(r.invariance <= r.threshold)) {
        return Err(Error::Certificate { residuals });
    }
    project_model(model, basis)
}

fn require_weight(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    let skew = asymmetry(m);
    if !(skew <= SYMMETRY_TOL * scale) {
        return Err(Error::Precondition(format!(
            "{name} is not symmetric (asymmetry {skew:e})"
        )));
    }
    let low = min_eigenvalue(m);
    if !(low >= -PSD_TOL * scale) {
        return Err(Error::Precondition(format!(
            "{name} is not positive semidefinite (min eigenvalue {low:e})"
        )));
    }
    Ok(())
}

/// Symmetric matrices `Π(t_k)` on the uniform grid `t_k = kT/M`.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiTrajectory {
    time_grid: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
}

impl RiccatiTrajectory {
    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn steps(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().expect("non-empty grid")
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn initial(&self) -> &DMatrix<f64> {
        &self.matrices[0]
    }

    pub fn terminal(&self) -> &DMatrix<f64> {
        self.matrices.last().expect("non-empty grid")
    }

    /// `Π(t)`, exact on grid points and linear in between.
    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon;
        if !(t >= -slack && t <= horizon + slack) {
            return Err(Error::Range(format!("t = {t} outside [0, {horizon}]")));
        }
        let steps = self.steps();
        let h = horizon / steps as f64;
        let nearest = ((t / h).round() as usize).min(steps);
        if (t - self.time_grid[nearest]).abs() <= 1e-12 * h {
            return Ok(self.matrices[nearest].clone());
        }
        let k = ((t / h).floor() as usize).min(steps - 1);
        let w = (t - self.time_grid[k]) / h;
        Ok(&self.matrices[k] * (1.0 - w) + &self.matrices[k + 1] * w)
    }

    /// Conjugates every matrix: `Π ↦ T Π Tᵀ`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> RiccatiTrajectory {
        RiccatiTrajectory {
            time_grid: self.time_grid.clone(),
            matrices: self
                .matrices
                .iter()
                .map(|m| symmetrize(&(t * m * t.transpose())))
                .collect(),
        }
    }

    /// Block-diagonal assembly of trajectories sharing one grid.
    pub fn block_diagonal(parts: &[RiccatiTrajectory]) -> Result<RiccatiTrajectory> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Dimension("no trajectories to assemble".into()))?;
        if parts.iter().any(|p| p.time_grid != first.time_grid) {
            return Err(Error::Dimension("trajectories on different time grids".into()));
        }
        let matrices = (0..first.matrices.len())
            .map(|k| {
                let blocks: Vec<_> = parts.iter().map(|p| p.matrices[k].clone()).collect();
                crate::linalg::block_diagonal(&blocks)
            })
            .collect();
        Ok(RiccatiTrajectory {
            time_grid: first.time_grid.clone(),
            matrices,
        })
    }

    /// One row per time point: `t` then the row-major entries of `Π(t)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_series(out, "p", &self.time_grid, &self.matrices)
    }
}

/// CSV of a time-indexed matrix family with columns `t, {prefix}_i_j`.
pub(crate) fn write_matrix_series<W: Write>(
    out: W,
    prefix: &str,
    times: &[f64],
    matrices: &[DMatrix<f64>],
) -> Result<()> {
    let (rows, cols) = matrices.first().map_or((0, 0), |m| m.shape());
    let mut header = vec!["t".to_string()];
    for i in 0..rows {
        for j in 0..cols {
            header.push(format!("{prefix}_{i}_{j}"));
        }
    }
    let body = times.iter().zip(matrices).map(|(t, m)| {
        std::iter::once(fmt_f64(*t))
            .chain(flatten_row_major(m).into_iter().map(fmt_f64))
            .collect::<Vec<_>>()
    });
    write_rows(out, &header, body)
}

/// Uniform grid `t_k = kT/M`, with `t_M = T` exactly.
pub fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| horizon * k as f64 / steps as f64)
        .collect()
}

/// Solves `−Π̇ = AᵀΠ + ΠA − ΠSΠ + Q`, `Π(T) = Q_T` for a general quadratic
/// coefficient `S`.
pub fn solve_riccati_general(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    horizon: f64,
    steps: usize,
) -> Result<RiccatiTrajectory> {
    let m = a.nrows();
    for (name, mat) in [("A", a), ("S", s), ("Q", q), ("Q_T", qt)] {
        if mat.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "{name} is {}x{}, expected {m}x{m}",
                mat.nrows(),
                mat.ncols()
            )));
        }
    }
    if steps == 0 {
        return Err(Error::Precondition("at least one time step is required".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be positive, got {horizon}")));
    }
    require_weight("Q", q)?;
    require_weight("Q_T", qt)?;

    let time_grid = uniform_grid(horizon, steps);
    let h = horizon / steps as f64;
    let rhs = |p: &DMatrix<f64>| -> DMatrix<f64> {
        let pa = p * a;
        let ps = p * s;
        pa.transpose() + pa - ps * p + q
    };

    let mut matrices = vec![DMatrix::zeros(m, m); steps + 1];
    matrices[steps] = qt.clone();
    let mut p = qt.clone();
    // integrate in reversed time τ = T − t, where dΠ/dτ = rhs(Π)
    for k in (0..steps).rev() {
        let k1 = rhs(&p);
        let k2 = rhs(&(&p + &k1 * (h / 2.0)));
        let k3 = rhs(&(&p + &k2 * (h / 2.0)));
        let k4 = rhs(&(&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        p = symmetrize(&p);
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                time: time_grid[k],
                detail: format!("{m}x{m} Riccati solution became non-finite"),
            });
        }
        matrices[k] = p.clone();
    }
    Ok(RiccatiTrajectory {
        time_grid,
        matrices,
    })
}

/// `−Π̇ = ĀᵀΠ + ΠĀ − ΠB̄B̄ᵀΠ + Q̄`, `Π(T) = Q̄_T`.
pub fn solve_riccati(
    abar: &DMatrix<f64>,
    bbar: &DMatrix<f64>,
    qbar: &DMatrix<f64>,
    qtbar: &DMatrix<f64>,
    horizon: f64,
    steps: usize,
) -> Result<RiccatiTrajectory> {
    if bbar.nrows() != abar.nrows() {
        return Err(Error::Dimension(format!(
            "B̄ has {} rows, Ā has {}",
            bbar.nrows(),
            abar.nrows()
        )));
    }
    let s = bbar * bbar.transpose();
    solve_riccati_general(abar, &s, qbar, qtbar, horizon, steps)
}

/// The `n × n` auxiliary equation `−π̇ = L_aᵀπ + πL_a − πL_bL_bᵀπ + L_q`,
/// `π(T) = L_qT`.
pub fn solve_auxiliary(model: &CouplingModel, steps: usize) -> Result<RiccatiTrajectory> {
    model.validate()?;
    solve_riccati(&model.la, &model.lb, &model.lq, &model.lqt, model.horizon, steps)
}

/// Operator norms of the residual couplings `𝐀_{𝒮⊥}`, `𝐁_{𝒮⊥}`, `𝐐_{𝒮⊥}`,
/// `𝐐_{T𝒮⊥}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct ResidualNorms {
    pub a: f64,
    pub b: f64,
    pub q: f64,
    pub qt: f64,
}

impl ResidualNorms {
    pub fn new(a: f64, b: f64, q: f64, qt: f64) -> Result<Self> {
        let norms = Self { a, b, q, qt };
        if [a, b, q, qt].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Precondition(format!(
                "residual norms must be finite and nonnegative, got {norms:?}"
            )));
        }
        Ok(norms)
    }

    pub fn is_zero(&self) -> bool {
        [self.a, self.b, self.q, self.qt].iter().all(|v| *v == 0.0)
    }
}

/// Sign conditions under which the inflated auxiliary equation is meant to
/// be used; returns a description of each one that fails.
pub fn robust_conditions(model: &CouplingModel) -> Vec<String> {
    let mut failed = Vec::new();
    let dqt = symmetrize(&model.dqt);
    if !(min_eigenvalue(&dqt) > 0.0) || asymmetry(&model.dqt) > SYMMETRY_TOL {
        failed.push("D_qT is not positive definite".to_string());
    }
    if !(min_eigenvalue(&model.dq) >= -PSD_TOL) || asymmetry(&model.dq) > SYMMETRY_TOL {
        failed.push("D_q is not positive semidefinite".to_string());
    }
    let dblb = &model.db * model.lb.transpose();
    if !(min_eigenvalue(&dblb) >= -PSD_TOL) {
        failed.push("D_b L_bᵀ is not positive semidefinite".to_string());
    }
    let real_parts_ok = model
        .da
        .clone()
        .complex_eigenvalues()
        .iter()
        .all(|l| l.re >= -PSD_TOL);
    if !real_parts_ok {
        failed.push("D_a has an eigenvalue with negative real part".to_string());
    }
    failed
}

/// The auxiliary equation inflated by the residual operator norms:
/// drift `L_a + D_a‖𝐀⊥‖`, quadratic coefficient
/// `L_bL_bᵀ − (D_bL_bᵀ + L_bD_bᵀ)‖𝐁⊥‖`, weights `L_q + D_q‖𝐐⊥‖` and
/// `L_qT + D_qT‖𝐐_T⊥‖`.
pub fn solve_robust_auxiliary(
    model: &CouplingModel,
    norms: &ResidualNorms,
    steps: usize,
) -> Result<RiccatiTrajectory> {
    model.validate()?;
    ResidualNorms::new(norms.a, norms.b, norms.q, norms.qt)?;
    for failed in robust_conditions(model) {
        log::warn!("inflated auxiliary Riccati equation: {failed}");
    }
    let drift = &model.la + &model.da * norms.a;
    let cross = &model.db * model.lb.transpose() + &model.lb * model.db.transpose();
    let energy = &model.lb * model.lb.transpose() - cross * norms.b;
    let q = &model.lq + &model.dq * norms.q;
    let qt = &model.lqt + &model.dqt * norms.qt;
    solve_riccati_general(&drift, &energy, &q, &qt, model.horizon, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{DictionaryGraphon, TrigFunction};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn dict(coeffs: [f64; 4]) -> Graphon {
        DictionaryGraphon::new(
            vec![TrigFunction::Sin(1), TrigFunction::Cos(1)],
            DMatrix::from_row_slice(2, 2, &coeffs),
        )
        .unwrap()
        .into()
    }

    fn sec5a() -> CouplingModel {
        CouplingModel::scalar(
            [2.0, 1.0, 1.2, 1.0, 1.0, 1.0, 2.0, 1.0],
            dict([1.0, 0.5, 0.5, 1.0]),
            dict([-0.5, 0.0, 0.0, 0.5]),
            dict([0.5, 0.0, 0.0, 0.0]),
            dict([0.0, 0.0, 0.0, 0.5]),
            1.0,
        )
    }

    #[test]
    fn zero_weights_give_zero_solution() {
        let z = scalar(0.0);
        let traj = solve_riccati(&scalar(1.3), &scalar(0.7), &z, &z, 1.0, 20).unwrap();
        assert!(traj.matrices().iter().all(|m| m[(0, 0)] == 0.0));
    }

    #[test]
    fn terminal_condition_is_exact() {
        let qt = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let traj = solve_riccati(
            &DMatrix::identity(2, 2),
            &DMatrix::identity(2, 2),
            &DMatrix::identity(2, 2),
            &qt,
            0.5,
            7,
        )
        .unwrap();
        assert_eq!(traj.terminal(), &qt);
        assert_eq!(traj.time_grid().len(), 8);
        assert_eq!(traj.horizon(), 0.5);
    }

    #[test]
    fn rejects_indefinite_weights_and_zero_steps() {
        let one = scalar(1.0);
        assert!(matches!(
            solve_riccati(&one, &one, &scalar(-1.0), &one, 1.0, 10),
            Err(Error::Precondition(_))
        ));
        assert!(solve_riccati(&one, &one, &one, &one, 1.0, 0).is_err());
    }

    #[test]
    fn indefinite_energy_blows_up_with_time() {
        // dπ/dτ = π², π(0)=1 blows up at τ = 1
        let err = solve_riccati_general(&scalar(0.0), &scalar(-1.0), &scalar(0.0), &scalar(1.0), 3.0, 300)
            .unwrap_err();
        match err {
            Error::Integration { time, .. } => assert!(time > 0.0 && time < 2.1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn interpolation_is_exact_on_grid_and_linear_between() {
        let traj = solve_riccati(&scalar(0.0), &scalar(1.0), &scalar(0.0), &scalar(1.0), 1.0, 10).unwrap();
        for (k, t) in traj.time_grid().iter().enumerate() {
            assert_eq!(traj.at(*t).unwrap(), traj.matrices()[k]);
        }
        let mid = traj.at(0.05).unwrap()[(0, 0)];
        let expected = 0.5 * (traj.matrices()[0][(0, 0)] + traj.matrices()[1][(0, 0)]);
        assert!((mid - expected).abs() < 1e-15);
        assert!(traj.at(1.5).is_err());
    }

    #[test]
    fn projected_sec5a_drift() {
        let basis = SubspaceBasis::from_dictionary(vec![TrigFunction::Sin(1), TrigFunction::Cos(1)]).unwrap();
        let p = assemble_projected(&sec5a(), &basis).unwrap();
        assert_eq!(p.abar, DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 3.0]));
        assert_eq!(p.bbar, DMatrix::from_row_slice(2, 2, &[0.7, 0.0, 0.0, 1.7]));
    }

    #[test]
    fn assemble_refuses_non_invariant_basis() {
        let basis = SubspaceBasis::from_dictionary(vec![TrigFunction::Sin(1)]).unwrap();
        match assemble_projected(&sec5a(), &basis) {
            Err(Error::Certificate { residuals }) => {
                assert_eq!(residuals.len(), 4);
                assert!(residuals[0].invariance > 0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn auxiliary_matches_scalar_solve() {
        let m = sec5a();
        let aux = solve_auxiliary(&m, 200).unwrap();
        let direct = solve_riccati(&scalar(2.0), &scalar(1.2), &scalar(1.0), &scalar(2.0), 1.0, 200).unwrap();
        for (a, b) in aux.matrices().iter().zip(direct.matrices()) {
            assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn robust_with_zero_norms_is_auxiliary() {
        let m = sec5a();
        let aux = solve_auxiliary(&m, 100).unwrap();
        let robust = solve_robust_auxiliary(&m, &ResidualNorms::default(), 100).unwrap();
        for (a, b) in aux.matrices().iter().zip(robust.matrices()) {
            assert!((a - b).amax() <= 1e-12);
        }
    }

    #[test]
    fn robust_inflation_is_finite_for_reported_norms() {
        let m = sec5a();
        let norms = ResidualNorms::new(0.058, 0.076, 0.058, 0.058).unwrap();
        let robust = solve_robust_auxiliary(&m, &norms, 200).unwrap();
        assert!(robust.matrices().iter().all(|p| p[(0, 0)].is_finite() && p[(0, 0)] >= 0.0));
        assert!(robust_conditions(&m).is_empty());
        assert!(ResidualNorms::new(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn block_diagonal_assembly() {
        let one = scalar(1.0);
        let a = solve_riccati(&one, &one, &one, &one, 1.0, 4).unwrap();
        let b = solve_riccati(&scalar(0.0), &one, &one, &one, 1.0, 4).unwrap();
        let ab = RiccatiTrajectory::block_diagonal(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(ab.initial()[(0, 0)], a.initial()[(0, 0)]);
        assert_eq!(ab.initial()[(1, 1)], b.initial()[(0, 0)]);
        assert_eq!(ab.initial()[(0, 1)], 0.0);
    }
}
