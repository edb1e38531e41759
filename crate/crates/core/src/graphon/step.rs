use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, max_abs};

/// The step-function graphon of an `N × N` coupling matrix on the uniform
/// partition of `[0,1]`.
///
/// Acting on a grid function it reproduces the network coupling
/// `zᵢ = (1/N) Σⱼ wᵢⱼ xⱼ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGraphon {
    weights: DMatrix<f64>,
    bound: f64,
}

impl StepGraphon {
    /// Embeds a finite network. The weights must be exactly symmetric and
    /// bounded in magnitude by `bound`.
    pub fn from_matrix(weights: DMatrix<f64>, bound: f64) -> Result<Self> {
        if !weights.is_square() || weights.nrows() == 0 {
            return Err(Error::Construction(format!(
                "step graphon weights must be a non-empty square matrix, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("non-finite weight".into()));
        }
        let skew = asymmetry(&weights);
        if skew != 0.0 {
            return Err(Error::Construction(format!(
                "step graphon weights are not symmetric (max |w_ij - w_ji| = {skew:e})"
            )));
        }
        let largest = max_abs(&weights);
        if !(bound >= 0.0) || largest > bound {
            return Err(Error::Construction(format!(
                "weight magnitude {largest} exceeds declared bound {bound}"
            )));
        }
        Ok(Self { weights, bound })
    }

    /// Like [`StepGraphon::from_matrix`] with the bound taken from the data.
    pub fn from_matrix_unbounded(weights: DMatrix<f64>) -> Result<Self> {
        let bound = max_abs(&weights);
        Self::from_matrix(weights, bound)
    }

    pub fn grid_size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `W / N`: the matrix of the integral operator on grid values.
    pub fn kernel(&self) -> DMatrix<f64> {
        &self.weights / self.grid_size() as f64
    }
}
