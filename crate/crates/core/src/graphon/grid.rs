use std::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A function in `(L²[0,1])ⁿ` that is constant on each interval of the
/// uniform `N`-partition of `[0,1]`.
///
/// Row `i` holds the `ℝⁿ` value on the `i`-th interval, so a finite network
/// state `[x¹; …; xᴺ]` maps onto rows one-to-one. The inner product is the
/// Riemann sum `(1/N) Σᵢ ⟨uᵢ, vᵢ⟩`, which is exact for step functions.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: DMatrix<f64>,
}

impl GridFunction {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "grid function needs at least one interval and one component, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(grid_size: usize, dim: usize) -> Self {
        Self {
            values: DMatrix::zeros(grid_size, dim),
        }
    }

    /// Scalar-valued grid function (`n = 1`).
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Builds from the agent-major stacking `[x¹; …; xᴺ]` of `ℝⁿᴺ`.
    pub fn from_stacked(stacked: &DVector<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !stacked.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "vector of length {} does not split into {dim}-dimensional agents",
                stacked.len()
            )));
        }
        let size = stacked.len() / dim;
        Self::new(DMatrix::from_row_slice(size, dim, stacked.as_slice()))
    }

    pub fn grid_size(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Value at agent (interval) `i`.
    pub fn agent(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Agent-major stacking into `ℝⁿᴺ`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_vec(crate::linalg::flatten_row_major(&self.values))
    }

    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.values.dot(&other.values) / self.grid_size() as f64)
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.norm_squared() / self.grid_size() as f64
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, factor: f64) -> GridFunction {
        GridFunction {
            values: &self.values * factor,
        }
    }

    /// Applies a local matrix to every agent: `v(α) ↦ D v(α)`.
    pub fn map_local(&self, local: &DMatrix<f64>) -> Result<GridFunction> {
        if local.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "local matrix has {} columns, grid function has {} components",
                local.ncols(),
                self.dim()
            )));
        }
        Ok(GridFunction {
            values: &self.values * local.transpose(),
        })
    }

    pub fn check_shape(&self, other: &GridFunction) -> Result<()> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::Dimension(format!(
                "grid functions of shape {:?} and {:?}",
                self.values.shape(),
                other.values.shape()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Add for &GridFunction {
    type Output = GridFunction;

    fn add(self, rhs: &GridFunction) -> GridFunction {
        GridFunction {
            values: &self.values + &rhs.values,
        }
    }
}

impl Sub for &GridFunction {
    type Output = GridFunction;

    fn sub(self, rhs: &GridFunction) -> GridFunction {
        GridFunction {
            values: &self.values - &rhs.values,
        }
    }
}
