//! Harmonic oscillators coupled through a graphon.
//!
//! Each agent is an oscillator `ẋ = L_a x + (𝐀x) + L_b u` with
//! `L_a = [[0, α], [−α, 0]]`, `L_b = diag(0, β)`, and tracks the weighted
//! neighbourhood average `z = 𝐀x` through the cost
//! `(x − ηz)ᵀQ(x − ηz) + r|u|²`. On the eigenbasis of `𝐀` the problem splits
//! into one 2×2 Riccati equation per mode, with drift `L_a + λ_ℓI` and
//! weights `(1 − ηλ_ℓ)²Q`, plus the 2×2 auxiliary equation.
//!
//! A control weight `r·I` is absorbed by scaling the input matrix by
//! `1/√r`; controls reported by the resulting law are in the scaled units
//! `√r·u`.

use nalgebra::DMatrix;

use super::{synthesize_approximate_with_norms, ControlLaw, LawMode};
use crate::error::{Error, Result};
use crate::graphon::Graphon;
use crate::linalg::{asymmetry, block_diagonal, min_eigenvalue};
use crate::riccati::{
    solve_riccati, solve_riccati_general, CouplingModel, ProjectedModel, ResidualNorms,
    RiccatiTrajectory, PSD_TOL, SYMMETRY_TOL,
};
use crate::subspace::{SubspaceBasis, RANK_TOL};

#[derive(Clone, Debug)]
pub struct OscillatorModel {
    alpha: f64,
    beta: f64,
    q: DMatrix<f64>,
    qt: DMatrix<f64>,
    eta: f64,
    control_weight: f64,
    graphon: Graphon,
    modes: usize,
    horizon: f64,
}

impl OscillatorModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        beta: f64,
        q: DMatrix<f64>,
        qt: DMatrix<f64>,
        eta: f64,
        control_weight: f64,
        graphon: Graphon,
        modes: usize,
        horizon: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::Construction(format!(
                "alpha and beta must be positive, got {alpha} and {beta}"
            )));
        }
        for (name, m) in [("Q", &q), ("Q_T", &qt)] {
            if m.shape() != (2, 2) {
                return Err(Error::Dimension(format!("{name} must be 2x2")));
            }
            if !(asymmetry(m) <= SYMMETRY_TOL && min_eigenvalue(m) >= -PSD_TOL) {
                return Err(Error::Construction(format!(
                    "{name} must be symmetric positive semidefinite"
                )));
            }
        }
        if !eta.is_finite() {
            return Err(Error::Construction(format!("eta must be finite, got {eta}")));
        }
        if !(control_weight > 0.0 && control_weight.is_finite()) {
            return Err(Error::Construction(format!(
                "control weight must be positive, got {control_weight}"
            )));
        }
        if modes == 0 {
            return Err(Error::Range("at least one mode is required".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Construction(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            alpha,
            beta,
            q,
            qt,
            eta,
            control_weight,
            graphon,
            modes,
            horizon,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn qt(&self) -> &DMatrix<f64> {
        &self.qt
    }

    pub fn graphon(&self) -> &Graphon {
        &self.graphon
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// The same oscillators coupled through another graphon.
    pub fn with_graphon(&self, graphon: Graphon) -> Self {
        Self {
            graphon,
            ..self.clone()
        }
    }

    pub fn drift(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, self.alpha, -self.alpha, 0.0])
    }

    pub fn input(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, self.beta / self.control_weight.sqrt()])
    }

    /// `(1 − ηλ)²`: the cost scaling of a mode with eigenvalue `λ`.
    pub fn mode_factor(&self, lambda: f64) -> f64 {
        (1.0 - self.eta * lambda).powi(2)
    }

    /// The 2×2 Riccati equation of one mode.
    pub fn solve_mode(&self, lambda: f64, steps: usize) -> Result<RiccatiTrajectory> {
        let b = self.input();
        let w = self.mode_factor(lambda);
        solve_riccati_general(
            &(self.drift() + DMatrix::identity(2, 2) * lambda),
            &(&b * b.transpose()),
            &(&self.q * w),
            &(&self.qt * w),
            self.horizon,
            steps,
        )
    }
}

/// Writes the oscillator problem as a general coupling model:
/// `ℚ = Q𝕀 + Q(η²𝐀² − 2η𝐀)`, i.e. `Q ⊗ (𝕀 − η𝐀)²`, and likewise for the
/// terminal weight.
pub fn expand_oscillator(model: &OscillatorModel) -> Result<CouplingModel> {
    let eta = model.eta;
    let tracking = model.graphon.square().combine(eta * eta, &model.graphon, -2.0 * eta)?;
    Ok(CouplingModel {
        la: model.drift(),
        da: DMatrix::identity(2, 2),
        lb: model.input(),
        db: DMatrix::zeros(2, 2),
        lq: model.q.clone(),
        dq: model.q.clone(),
        lqt: model.qt.clone(),
        dqt: model.qt.clone(),
        a: model.graphon.clone(),
        b: Graphon::zero(),
        q: tracking.clone(),
        qt: tracking,
        horizon: model.horizon,
    })
}

/// `(𝕀 − η𝐀_{𝒮⊥})² − 𝕀`, the residual of the tracking weight outside the
/// span of `basis`.
pub fn oscillator_cost_residual(model: &OscillatorModel, basis: &SubspaceBasis) -> Result<Graphon> {
    let perp = model.graphon.residual(basis)?;
    let eta = model.eta;
    perp.square().combine(eta * eta, &perp, -2.0 * eta)
}

/// Optimal law for the oscillators on the graphon of `model`, from the `d`
/// decoupled mode equations and the auxiliary equation.
pub fn oscillator_law(model: &OscillatorModel, steps: usize) -> Result<ControlLaw> {
    let spectrum = model.graphon.spectral_decomposition(model.modes)?;
    let lambdas = &spectrum.eigenvalues;
    let lead = lambdas[0].abs().max(1.0);
    if let Some(l) = lambdas.iter().position(|v| !(v.abs() > RANK_TOL * lead)) {
        return Err(Error::Range(format!(
            "requested {} modes but eigenvalue {} is {:e}; the coupling has rank {l}",
            model.modes,
            l + 1,
            lambdas[l]
        )));
    }
    let mode_solutions = lambdas
        .iter()
        .map(|l| model.solve_mode(*l, steps))
        .collect::<Result<Vec<_>>>()?;
    let projected_riccati = RiccatiTrajectory::block_diagonal(&mode_solutions)?;
    let lb = model.input();
    let auxiliary_riccati = solve_riccati(&model.drift(), &lb, &model.q, &model.qt, model.horizon, steps)?;

    let blocks = |f: &dyn Fn(f64) -> DMatrix<f64>| {
        block_diagonal(&lambdas.iter().map(|l| f(*l)).collect::<Vec<_>>())
    };
    let projected = ProjectedModel {
        abar: blocks(&|l| model.drift() + DMatrix::identity(2, 2) * l),
        bbar: blocks(&|_| lb.clone()),
        qbar: blocks(&|l| &model.q * model.mode_factor(l)),
        qtbar: blocks(&|l| &model.qt * model.mode_factor(l)),
    };
    Ok(ControlLaw::from_parts(
        spectrum.eigenfunctions,
        2,
        projected,
        lb,
        projected_riccati,
        auxiliary_riccati,
        LawMode::Exact,
        ResidualNorms::default(),
    ))
}

/// Projection-based approximate law on the top-`d` eigenbasis, with the
/// residual norms `‖𝐀_{𝒮⊥}‖`, `0` and `‖(𝕀 − η𝐀_{𝒮⊥})² − 𝕀‖`.
pub fn oscillator_approximate_law(model: &OscillatorModel, steps: usize) -> Result<ControlLaw> {
    let basis = SubspaceBasis::eigenbasis(&model.graphon, model.modes)?;
    let a_perp = model.graphon.residual(&basis)?.operator_norm();
    let q_perp = oscillator_cost_residual(model, &basis)?.operator_norm();
    let norms = ResidualNorms::new(a_perp, 0.0, q_perp, q_perp)?;
    synthesize_approximate_with_norms(&expand_oscillator(model)?, &basis, &norms, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphon::{step_from_matrix, SbmSpec};
    use crate::subspace::project_kernel;

    fn sbm_limit(n: usize) -> Graphon {
        let probs = DMatrix::from_row_slice(3, 3, &[0.25, 0.05, 0.02, 0.05, 0.35, 0.07, 0.02, 0.07, 0.40]);
        let spec = SbmSpec::equal_blocks(probs, n, 0).unwrap();
        step_from_matrix(spec.expected_weights(), 1.0).unwrap()
    }

    fn model(eta: f64, graphon: Graphon) -> OscillatorModel {
        OscillatorModel::new(
            10.0,
            1.5,
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2) * 2.0,
            eta,
            1.0,
            graphon,
            3,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn expansion_weights_modes_by_tracking_factor() {
        let m = model(3.0, sbm_limit(12));
        let coupled = expand_oscillator(&m).unwrap();
        let basis = SubspaceBasis::eigenbasis(&m.graphon, 3).unwrap();
        let lambdas = m.graphon.spectral_decomposition(3).unwrap().eigenvalues;
        let proj = crate::riccati::project_model(&coupled, &basis).unwrap();
        for (l, lambda) in lambdas.iter().enumerate() {
            let block = proj.qtbar.view((2 * l, 2 * l), (2, 2));
            let expected = DMatrix::identity(2, 2) * 2.0 * (1.0 - 3.0 * lambda).powi(2);
            assert!((block - expected).amax() < 1e-12);
        }
        let k = project_kernel(&coupled.q, &basis).unwrap();
        for (l, lambda) in lambdas.iter().enumerate() {
            assert!((k[(l, l)] - (9.0 * lambda * lambda - 6.0 * lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_eta_is_plain_state_cost() {
        let m = model(0.0, sbm_limit(12));
        assert_eq!(m.mode_factor(0.3), 1.0);
        assert_eq!(m.mode_factor(-2.0), 1.0);
        let m = model(2.0, sbm_limit(12));
        assert_eq!(m.mode_factor(0.5), 0.0);
    }

    #[test]
    fn zero_eigenvalue_mode_is_auxiliary_equation() {
        let m = model(3.0, sbm_limit(12));
        let mode = m.solve_mode(0.0, 100).unwrap();
        let aux = solve_riccati(&m.drift(), &m.input(), m.q(), m.qt(), 2.0, 100).unwrap();
        assert_eq!(mode, aux);
    }

    #[test]
    fn decoupled_law_matches_kronecker_solve() {
        let m = model(3.0, sbm_limit(12));
        let law = oscillator_law(&m, 200).unwrap();
        let coupled = expand_oscillator(&m).unwrap();
        let basis = SubspaceBasis::eigenbasis(&m.graphon, 3).unwrap();
        let proj = crate::riccati::assemble_projected(&coupled, &basis).unwrap();
        let full = solve_riccati(&proj.abar, &proj.bbar, &proj.qbar, &proj.qtbar, 2.0, 200).unwrap();
        for (a, b) in law.projected_riccati().matrices().iter().zip(full.matrices()) {
            assert!((a - b).amax() <= 1e-8 * b.amax().max(1.0));
        }
    }

    #[test]
    fn too_many_modes_is_rejected() {
        let mut m = model(3.0, sbm_limit(12));
        m.modes = 4;
        assert!(matches!(oscillator_law(&m, 10), Err(Error::Range(_))));
    }

    #[test]
    fn printed_residual_equals_generic_residual() {
        let w = DMatrix::from_fn(9, 9, |i, j| if i == j { 0.0 } else { ((i * j) % 3) as f64 * 0.5 });
        let m = model(3.0, step_from_matrix(w, 1.0).unwrap());
        let basis = SubspaceBasis::eigenbasis(&m.graphon, 2).unwrap();
        let printed = oscillator_cost_residual(&m, &basis).unwrap();
        let generic = expand_oscillator(&m).unwrap().q.residual(&basis).unwrap();
        let diff = printed.kernel_on_grid(9).unwrap() - generic.kernel_on_grid(9).unwrap();
        assert!(diff.amax() < 1e-12);
    }
}
