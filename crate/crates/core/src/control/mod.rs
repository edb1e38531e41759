//! Decomposed feedback laws.
//!
//! A [`ControlLaw`] pairs two Riccati solutions: the `nd × nd` one for the
//! subspace coordinates `x^p` and the `n × n` auxiliary one for the remainder
//! `x̆ = x − Σ_ℓ x^{p,ℓ} f_ℓ`. The control is
//!
//! ```text
//! u(t) = Σ_ℓ f_ℓ u^{p,ℓ}(t) − L_bᵀπ(t)x̆(t),    u^p(t) = −B̄ᵀΠ(t)x^p(t)
//! ```
//!
//! In exact mode (certified invariant, low-rank couplings) this is the
//! optimal control. In approximate mode the auxiliary equation is inflated by
//! the residual operator norms.

mod oscillator;

pub use oscillator::{
    expand_oscillator, oscillator_approximate_law, oscillator_cost_residual, oscillator_law,
    OscillatorModel,
};

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, OperatorResidual, Result};
use crate::graphon::GridFunction;
use crate::riccati::{
    project_model, solve_auxiliary, solve_riccati, solve_robust_auxiliary, write_matrix_series,
    CouplingModel, ProjectedModel, ResidualNorms, RiccatiTrajectory,
};
use crate::sim::Feedback;
use crate::subspace::{
    certify, project_function, reconstruct, ProjectedVector, SubspaceBasis, CERTIFICATE_TOL,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LawMode {
    Exact,
    Approximate,
}

impl std::fmt::Display for LawMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LawMode::Exact => "exact",
            LawMode::Approximate => "approximate",
        })
    }
}

/// A synthesized decomposed feedback law.
#[derive(Clone, Debug)]
pub struct ControlLaw {
    basis: SubspaceBasis,
    dim: usize,
    projected: ProjectedModel,
    lb: DMatrix<f64>,
    projected_riccati: RiccatiTrajectory,
    auxiliary_riccati: RiccatiTrajectory,
    mode: LawMode,
    residual_norms: ResidualNorms,
    certificate: Vec<OperatorResidual>,
}

/// Certified synthesis: fails with [`Error::Certificate`] unless `basis`
/// spans an invariant subspace of all four couplings and every coupling has
/// zero residual outside it (within `1e-8 · max(‖·‖, 1)`).
pub fn synthesize_exact(
    model: &CouplingModel,
    basis: &SubspaceBasis,
    steps: usize,
) -> Result<ControlLaw> {
    model.validate()?;
    let residuals = certify(&model.operators(), basis, CERTIFICATE_TOL)?;
    let passes = |r: &OperatorResidual| r.invariance <= r.threshold && r.low_rank <= r.threshold;
    if !residuals.iter().all(passes) {
        return Err(Error::Certificate { residuals });
    }
    let projected = project_model(model, basis)?;
    let projected_riccati = solve_projected(&projected, model.horizon, steps)?;
    let auxiliary_riccati = solve_auxiliary(model, steps)?;
    Ok(ControlLaw {
        basis: basis.clone(),
        dim: model.dim(),
        projected,
        lb: model.lb.clone(),
        projected_riccati,
        auxiliary_riccati,
        mode: LawMode::Exact,
        residual_norms: ResidualNorms::default(),
        certificate: residuals,
    })
}

/// Synthesis for couplings that are not low-rank on `basis`: the residual
/// operator norms are measured and fed to the inflated auxiliary equation.
/// A basis that is not invariant is accepted with a warning.
pub fn synthesize_approximate(
    model: &CouplingModel,
    basis: &SubspaceBasis,
    steps: usize,
) -> Result<ControlLaw> {
    model.validate()?;
    let residuals = certify(&model.operators(), basis, CERTIFICATE_TOL)?;
    for r in residuals.iter().filter(|r| !(r.invariance <= r.threshold)) {
        log::warn!(
            "basis is not invariant under {} (residual {:.3e} > {:.3e}); the projected law is heuristic",
            r.operator,
            r.invariance,
            r.threshold
        );
    }
    let norms = ResidualNorms::new(
        residuals[0].low_rank,
        residuals[1].low_rank,
        residuals[2].low_rank,
        residuals[3].low_rank,
    )?;
    let mut law = synthesize_approximate_with_norms(model, basis, &norms, steps)?;
    law.certificate = residuals;
    Ok(law)
}

/// Approximate synthesis with caller-supplied residual norms.
pub fn synthesize_approximate_with_norms(
    model: &CouplingModel,
    basis: &SubspaceBasis,
    norms: &ResidualNorms,
    steps: usize,
) -> Result<ControlLaw> {
    let projected = project_model(model, basis)?;
    let projected_riccati = solve_projected(&projected, model.horizon, steps)?;
    let auxiliary_riccati = solve_robust_auxiliary(model, norms, steps)?;
    Ok(ControlLaw {
        basis: basis.clone(),
        dim: model.dim(),
        projected,
        lb: model.lb.clone(),
        projected_riccati,
        auxiliary_riccati,
        mode: LawMode::Approximate,
        residual_norms: *norms,
        certificate: Vec::new(),
    })
}

fn solve_projected(p: &ProjectedModel, horizon: f64, steps: usize) -> Result<RiccatiTrajectory> {
    solve_riccati(&p.abar, &p.bbar, &p.qbar, &p.qtbar, horizon, steps)
}

impl ControlLaw {
    /// Assembles a law from precomputed parts; used where the Riccati
    /// equations are solved in a structured way.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        basis: SubspaceBasis,
        dim: usize,
        projected: ProjectedModel,
        lb: DMatrix<f64>,
        projected_riccati: RiccatiTrajectory,
        auxiliary_riccati: RiccatiTrajectory,
        mode: LawMode,
        residual_norms: ResidualNorms,
    ) -> Self {
        Self {
            basis,
            dim,
            projected,
            lb,
            projected_riccati,
            auxiliary_riccati,
            mode,
            residual_norms,
            certificate: Vec::new(),
        }
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.basis.dim()
    }

    pub fn mode(&self) -> LawMode {
        self.mode
    }

    pub fn horizon(&self) -> f64 {
        self.projected_riccati.horizon()
    }

    pub fn projected_model(&self) -> &ProjectedModel {
        &self.projected
    }

    pub fn projected_riccati(&self) -> &RiccatiTrajectory {
        &self.projected_riccati
    }

    pub fn auxiliary_riccati(&self) -> &RiccatiTrajectory {
        &self.auxiliary_riccati
    }

    pub fn residual_norms(&self) -> &ResidualNorms {
        &self.residual_norms
    }

    /// Residuals measured at synthesis (empty when norms were supplied).
    pub fn certificate(&self) -> &[OperatorResidual] {
        &self.certificate
    }

    /// `B̄ᵀΠ(t)`.
    pub fn projected_gain(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.projected.bbar.transpose() * self.projected_riccati.at(t)?)
    }

    /// `L_bᵀπ(t)`.
    pub fn auxiliary_gain(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.lb.transpose() * self.auxiliary_riccati.at(t)?)
    }

    /// `u^p = −B̄ᵀΠ(t)x^p`.
    pub fn projected_control(&self, t: f64, xp: &ProjectedVector) -> Result<ProjectedVector> {
        self.check_projected(xp)?;
        let u = -(self.projected_gain(t)? * xp.coords());
        ProjectedVector::new(u, self.lb.ncols(), self.modes())
    }

    fn check_projected(&self, xp: &ProjectedVector) -> Result<()> {
        if xp.dim() != self.dim || xp.modes() != self.modes() {
            return Err(Error::Dimension(format!(
                "projected state has n = {}, d = {}; law has n = {}, d = {}",
                xp.dim(),
                xp.modes(),
                self.dim,
                self.modes()
            )));
        }
        Ok(())
    }

    /// Centralized evaluation of the feedback on a whole grid state.
    pub fn control_field(&self, t: f64, x: &GridFunction) -> Result<GridFunction> {
        if x.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state has {} components, law expects {}",
                x.dim(),
                self.dim
            )));
        }
        let grid = x.grid_size();
        let xp = project_function(x, &self.basis)?;
        let xf = reconstruct(&xp, &self.basis, grid)?;
        let remainder = x - &xf;
        let up = self.projected_control(t, &xp)?;
        let subspace_part = reconstruct(&up, &self.basis, grid)?;
        let aux = remainder.map_local(&(-self.auxiliary_gain(t)?))?;
        Ok(&subspace_part + &aux)
    }

    /// The control of the agent at `γ`, from its own state, the shared
    /// projected state and the basis values `f(γ)`.
    pub fn evaluate_nodal(
        &self,
        t: f64,
        local_state: &DVector<f64>,
        xp: &ProjectedVector,
        basis_values: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Range(format!("t = {t} outside [0, {horizon}]")));
        }
        self.check_projected(xp)?;
        if local_state.len() != self.dim || basis_values.len() != self.modes() {
            return Err(Error::Dimension(format!(
                "local state of length {} and {} basis values for n = {}, d = {}",
                local_state.len(),
                basis_values.len(),
                self.dim,
                self.modes()
            )));
        }
        let mut remainder = local_state.clone();
        for (l, f) in basis_values.iter().enumerate() {
            remainder -= xp.mode(l) * *f;
        }
        let up = self.projected_control(t, xp)?;
        let mut u = -(self.auxiliary_gain(t)? * remainder);
        for (l, f) in basis_values.iter().enumerate() {
            u += up.mode(l) * *f;
        }
        Ok(u)
    }

    /// `x^p` along the projected closed loop `ẋ^p = (Ā − B̄B̄ᵀΠ(t))x^p`,
    /// integrated with RK4 on the Riccati time grid.
    pub fn aggregate_trajectory(&self, xp0: &ProjectedVector) -> Result<Vec<ProjectedVector>> {
        self.check_projected(xp0)?;
        let grid = self.projected_riccati.time_grid();
        let closed = |t: f64| -> Result<DMatrix<f64>> {
            Ok(&self.projected.abar - &self.projected.bbar * self.projected_gain(t)?)
        };
        let mut x = xp0.coords().clone();
        let mut out = vec![xp0.clone()];
        for w in grid.windows(2) {
            let (t, h) = (w[0], w[1] - w[0]);
            let mid = closed(t + h / 2.0)?;
            let k1 = closed(t)? * &x;
            let k2 = &mid * (&x + &k1 * (h / 2.0));
            let k3 = &mid * (&x + &k2 * (h / 2.0));
            let k4 = closed(w[1])? * (&x + &k3 * h);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    time: w[1],
                    detail: "projected closed loop became non-finite".into(),
                });
            }
            out.push(ProjectedVector::new(x.clone(), self.dim, self.modes())?);
        }
        Ok(out)
    }

    /// Time series of `B̄ᵀΠ(t)` (columns `t, k_i_j`).
    pub fn write_projected_gain_csv<W: Write>(&self, out: W) -> Result<()> {
        let times = self.projected_riccati.time_grid();
        let gains = times
            .iter()
            .map(|t| self.projected_gain(*t))
            .collect::<Result<Vec<_>>>()?;
        write_matrix_series(out, "k", times, &gains)
    }

    /// Time series of `L_bᵀπ(t)` (columns `t, k_i_j`).
    pub fn write_auxiliary_gain_csv<W: Write>(&self, out: W) -> Result<()> {
        let times = self.auxiliary_riccati.time_grid();
        let gains = times
            .iter()
            .map(|t| self.auxiliary_gain(*t))
            .collect::<Result<Vec<_>>>()?;
        write_matrix_series(out, "k", times, &gains)
    }
}

impl Feedback for ControlLaw {
    fn horizon(&self) -> f64 {
        ControlLaw::horizon(self)
    }

    fn control(&self, t: f64, x: &GridFunction) -> Result<GridFunction> {
        self.control_field(t, x)
    }
}
