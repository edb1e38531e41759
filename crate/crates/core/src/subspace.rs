//! Orthonormal bases of a common invariant subspace `𝒮 ⊂ L²[0,1]` and the
//! projections they induce.
//!
//! Projected vectors use the mode-major layout `[x^{p,1}; …; x^{p,d}]`, where
//! `x^{p,ℓ} ∈ ℝⁿ` collects `⟨xᵢ, f_ℓ⟩` over the `n` state components. In this
//! layout the projection of `D𝐓` is the Kronecker product `M ⊗ D` with
//! `M_{kℓ} = ⟨f_k, 𝐓 f_ℓ⟩`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, OperatorResidual, Result};
use crate::graphon::{embedding, sample_matrix, union, validate_dictionary};
use crate::graphon::{GridFunction, Graphon, TrigFunction};

/// Gram-matrix tolerance for a basis to count as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Relative pivot threshold of modified Gram–Schmidt.
pub const RANK_TOL: f64 = 1e-8;
/// Default certificate threshold, relative to `max(‖𝐓‖_op, 1)`.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
enum BasisRepr {
    /// `N × d` grid values, orthonormal under the Riemann inner product.
    Grid(DMatrix<f64>),
    /// `K × d` coefficients over an orthonormal trigonometric dictionary.
    Dictionary {
        functions: Vec<TrigFunction>,
        coeffs: DMatrix<f64>,
    },
}

/// `d` orthonormal functions `f_1 … f_d` spanning `𝒮`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    repr: BasisRepr,
}

impl SubspaceBasis {
    /// Orthonormalizes the columns of `values` (`N × d` grid samples) by
    /// modified Gram–Schmidt under the Riemann inner product. A column whose
    /// remainder falls below [`RANK_TOL`] times its original norm is an error.
    pub fn from_grid(values: DMatrix<f64>) -> Result<Self> {
        let (size, dim) = values.shape();
        if size == 0 || dim == 0 {
            return Err(Error::Dimension("empty basis".into()));
        }
        if dim > size {
            return Err(Error::Precondition(format!(
                "{dim} basis functions cannot be independent on {size} intervals"
            )));
        }
        let weight = 1.0 / size as f64;
        let mut q = values;
        for j in 0..dim {
            let original = (q.column(j).norm_squared() * weight).sqrt();
            for k in 0..j {
                let c = q.column(k).dot(&q.column(j)) * weight;
                let qk = q.column(k).into_owned();
                q.column_mut(j).axpy(-c, &qk, 1.0);
            }
            let norm = (q.column(j).norm_squared() * weight).sqrt();
            if !(norm > RANK_TOL * original) || original == 0.0 {
                return Err(Error::Precondition(format!(
                    "basis function {j} is linearly dependent on the previous ones"
                )));
            }
            q.column_mut(j).scale_mut(1.0 / norm);
        }
        Ok(Self {
            repr: BasisRepr::Grid(q),
        })
    }

    /// Accepts grid values that are already orthonormal (within
    /// [`ORTHONORMAL_TOL`]) without modifying them.
    pub fn from_orthonormal_grid(values: DMatrix<f64>) -> Result<Self> {
        let basis = Self {
            repr: BasisRepr::Grid(values),
        };
        basis.require_orthonormal()?;
        Ok(basis)
    }

    /// Dictionary elements themselves as the basis.
    pub fn from_dictionary(functions: Vec<TrigFunction>) -> Result<Self> {
        let k = functions.len();
        Self::from_dictionary_combination(functions, DMatrix::identity(k, k))
    }

    /// Columns of `coeffs` (`K × d`) are orthonormal combinations of the
    /// dictionary.
    pub fn from_dictionary_combination(
        functions: Vec<TrigFunction>,
        coeffs: DMatrix<f64>,
    ) -> Result<Self> {
        validate_dictionary(&functions)?;
        if coeffs.nrows() != functions.len() || coeffs.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "{}x{} coefficients for a dictionary of {}",
                coeffs.nrows(),
                coeffs.ncols(),
                functions.len()
            )));
        }
        let basis = Self {
            repr: BasisRepr::Dictionary { functions, coeffs },
        };
        basis.require_orthonormal()?;
        Ok(basis)
    }

    /// The top-`d` eigenfunctions of `g`.
    pub fn eigenbasis(g: &Graphon, d: usize) -> Result<Self> {
        Ok(g.spectral_decomposition(d)?.eigenfunctions)
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            BasisRepr::Grid(v) => v.ncols(),
            BasisRepr::Dictionary { coeffs, .. } => coeffs.ncols(),
        }
    }

    pub fn grid_size(&self) -> Option<usize> {
        match &self.repr {
            BasisRepr::Grid(v) => Some(v.nrows()),
            BasisRepr::Dictionary { .. } => None,
        }
    }

    /// `(functions, K × d coefficients)` for dictionary bases.
    pub fn dictionary(&self) -> Option<(&[TrigFunction], &DMatrix<f64>)> {
        match &self.repr {
            BasisRepr::Dictionary { functions, coeffs } => Some((functions, coeffs)),
            BasisRepr::Grid(_) => None,
        }
    }

    /// Largest entry of `Gram − I`.
    pub fn gram_error(&self) -> f64 {
        let gram = match &self.repr {
            BasisRepr::Grid(v) => v.transpose() * v / v.nrows() as f64,
            BasisRepr::Dictionary { coeffs, .. } => coeffs.transpose() * coeffs,
        };
        let d = gram.nrows();
        (gram - DMatrix::identity(d, d)).amax()
    }

    fn require_orthonormal(&self) -> Result<()> {
        let err = self.gram_error();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::Precondition(format!(
                "basis is not orthonormal (Gram error {err:e})"
            )));
        }
        Ok(())
    }

    /// `N × d` values of the basis functions on an `N`-grid. Dictionary bases
    /// are sampled at interval midpoints, which preserves orthonormality
    /// exactly when `N` exceeds twice the highest frequency.
    pub fn values_on_grid(&self, grid_size: usize) -> Result<DMatrix<f64>> {
        match &self.repr {
            BasisRepr::Grid(v) => {
                if v.nrows() != grid_size {
                    return Err(Error::Dimension(format!(
                        "basis lives on {} intervals, grid has {grid_size}",
                        v.nrows()
                    )));
                }
                Ok(v.clone())
            }
            BasisRepr::Dictionary { functions, coeffs } => {
                let top = functions.iter().map(|f| f.frequency()).max().unwrap_or(0) as usize;
                if grid_size <= 2 * top {
                    return Err(Error::Dimension(format!(
                        "a grid of {grid_size} intervals cannot resolve frequency {top}"
                    )));
                }
                Ok(sample_matrix(functions, grid_size) * coeffs)
            }
        }
    }

    /// `[f_1(γ), …, f_d(γ)]` at a point `γ ∈ [0,1]`.
    pub fn values_at(&self, gamma: f64) -> Result<DVector<f64>> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Range(format!("γ = {gamma} is outside [0, 1]")));
        }
        match &self.repr {
            BasisRepr::Grid(v) => {
                let size = v.nrows();
                // P_1 = [0, 1/N], P_k = ((k-1)/N, k/N]
                let idx = ((gamma * size as f64).ceil() as usize).clamp(1, size) - 1;
                Ok(v.row(idx).transpose())
            }
            BasisRepr::Dictionary { functions, coeffs } => {
                let phi = DVector::from_iterator(functions.len(), functions.iter().map(|f| f.eval(gamma)));
                Ok(coeffs.transpose() * phi)
            }
        }
    }
}

/// Coordinates `x^p ∈ ℝⁿᵈ` in the mode-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedVector {
    coords: DVector<f64>,
    dim: usize,
    modes: usize,
}

impl ProjectedVector {
    pub fn new(coords: DVector<f64>, dim: usize, modes: usize) -> Result<Self> {
        if coords.len() != dim * modes {
            return Err(Error::Dimension(format!(
                "{} coordinates for n = {dim}, d = {modes}",
                coords.len()
            )));
        }
        Ok(Self { coords, dim, modes })
    }

    /// From the `d × n` matrix `C_{ℓi} = ⟨xᵢ, f_ℓ⟩`.
    pub fn from_coefficients(c: &DMatrix<f64>) -> Self {
        let (modes, dim) = c.shape();
        Self {
            coords: DVector::from_vec(crate::linalg::flatten_row_major(c)),
            dim,
            modes,
        }
    }

    /// The `d × n` coefficient matrix.
    pub fn coefficients(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.modes, self.dim, self.coords.as_slice())
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `x^{p,ℓ} ∈ ℝⁿ`.
    pub fn mode(&self, l: usize) -> DVector<f64> {
        self.coords.rows(l * self.dim, self.dim).into_owned()
    }
}

/// Orthogonal split `x = x^f + x̆` with `x^f ∈ 𝒮ⁿ`, `x̆ ∈ (𝒮⊥)ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub subspace_part: GridFunction,
    pub auxiliary_part: GridFunction,
}

/// The identity operator or a graphon, as the `𝕋` of a projected `D𝕋`.
#[derive(Clone, Copy, Debug)]
pub enum Coupling<'a> {
    Identity,
    Kernel(&'a Graphon),
}

pub fn project_function(x: &GridFunction, basis: &SubspaceBasis) -> Result<ProjectedVector> {
    let f = basis.values_on_grid(x.grid_size())?;
    let c = f.transpose() * x.values() / x.grid_size() as f64;
    Ok(ProjectedVector::from_coefficients(&c))
}

/// `x^f = Σ_ℓ x^{p,ℓ} f_ℓ` on an `N`-grid.
pub fn reconstruct(
    xp: &ProjectedVector,
    basis: &SubspaceBasis,
    grid_size: usize,
) -> Result<GridFunction> {
    if xp.modes() != basis.dim() {
        return Err(Error::Dimension(format!(
            "{} modes for a basis of dimension {}",
            xp.modes(),
            basis.dim()
        )));
    }
    let f = basis.values_on_grid(grid_size)?;
    GridFunction::new(f * xp.coefficients())
}

pub fn decompose(x: &GridFunction, basis: &SubspaceBasis) -> Result<Decomposition> {
    let xp = project_function(x, basis)?;
    let subspace_part = reconstruct(&xp, basis, x.grid_size())?;
    let auxiliary_part = x - &subspace_part;
    Ok(Decomposition {
        subspace_part,
        auxiliary_part,
    })
}

/// How a graphon and a basis meet: exactly through dictionary coefficients,
/// or on a common grid.
pub(crate) enum Pairing {
    Analytic {
        dictionary: Vec<TrigFunction>,
        /// Graphon coefficients over `dictionary`.
        kernel: DMatrix<f64>,
        /// Basis coefficients over `dictionary` (`K × d`).
        basis: DMatrix<f64>,
    },
    Grid {
        /// `W / N`.
        kernel: DMatrix<f64>,
        /// `N × d` basis values.
        basis: DMatrix<f64>,
    },
}

pub(crate) fn pair(g: &Graphon, basis: &SubspaceBasis) -> Result<Pairing> {
    if let (Graphon::Dictionary(dg), Some((functions, coeffs))) = (g, basis.dictionary()) {
        let dictionary = union(dg.dictionary(), functions);
        let kernel = dg.embed(&dictionary);
        let index = embedding(functions, &dictionary);
        let mut c = DMatrix::zeros(dictionary.len(), coeffs.ncols());
        for (row, &target) in index.iter().enumerate() {
            c.row_mut(target).copy_from(&coeffs.row(row));
        }
        return Ok(Pairing::Analytic {
            dictionary,
            kernel,
            basis: c,
        });
    }
    let size = g
        .grid_size()
        .or(basis.grid_size())
        .expect("a non-dictionary pairing has a grid");
    Ok(Pairing::Grid {
        kernel: g.kernel_on_grid(size)?,
        basis: basis.values_on_grid(size)?,
    })
}

/// The `d × d` matrix `M_{kℓ} = ⟨f_k, 𝐓 f_ℓ⟩`.
pub fn project_kernel(g: &Graphon, basis: &SubspaceBasis) -> Result<DMatrix<f64>> {
    let m = match pair(g, basis)? {
        Pairing::Analytic { kernel, basis, .. } => basis.transpose() * kernel * basis,
        Pairing::Grid { kernel, basis } => {
            basis.transpose() * kernel * &basis / basis.nrows() as f64
        }
    };
    Ok(crate::linalg::symmetrize(&m))
}

/// `Proj_f(D𝕋) = M ⊗ D`.
pub fn project_operator(
    local: &DMatrix<f64>,
    coupling: Coupling<'_>,
    basis: &SubspaceBasis,
) -> Result<DMatrix<f64>> {
    if !local.is_square() {
        return Err(Error::Dimension(format!(
            "local matrix must be square, got {}x{}",
            local.nrows(),
            local.ncols()
        )));
    }
    let m = match coupling {
        Coupling::Identity => DMatrix::identity(basis.dim(), basis.dim()),
        Coupling::Kernel(g) => project_kernel(g, basis)?,
    };
    Ok(m.kronecker(local))
}

/// `max_ℓ ‖(I − P) 𝐓 f_ℓ‖`; zero exactly when `span(basis)` is `𝐓`-invariant.
pub fn check_invariance(g: &Graphon, basis: &SubspaceBasis) -> Result<f64> {
    let worst = match pair(g, basis)? {
        Pairing::Analytic { kernel, basis, .. } => {
            let image = kernel * &basis;
            let r = &image - &basis * (basis.transpose() * &image);
            column_norms(&r, 1.0)
        }
        Pairing::Grid { kernel, basis } => {
            let size = basis.nrows() as f64;
            let image = kernel * &basis;
            let r = &image - &basis * (basis.transpose() * &image / size);
            column_norms(&r, 1.0 / size)
        }
    };
    Ok(worst)
}

fn column_norms(r: &DMatrix<f64>, weight: f64) -> f64 {
    r.column_iter()
        .map(|c| (c.norm_squared() * weight).sqrt())
        .fold(0.0, f64::max)
}

/// `‖𝐓 − P𝐓P‖_op`; zero exactly when `𝐓` is low-rank in `span(basis)`.
pub fn check_lowrank(g: &Graphon, basis: &SubspaceBasis) -> Result<f64> {
    Ok(g.residual(basis)?.operator_norm())
}

/// Certificate threshold for one operator: `tol · max(‖𝐓‖_op, 1)`.
pub fn certificate_threshold(g: &Graphon, tol: f64) -> f64 {
    tol * g.operator_norm().max(1.0)
}

/// Invariance and low-rank residuals for a named set of operators.
pub fn certify(
    operators: &[(&'static str, &Graphon)],
    basis: &SubspaceBasis,
    tol: f64,
) -> Result<Vec<OperatorResidual>> {
    operators
        .iter()
        .map(|&(name, g)| {
            Ok(OperatorResidual {
                operator: name,
                invariance: check_invariance(g, basis)?,
                low_rank: check_lowrank(g, basis)?,
                threshold: certificate_threshold(g, tol),
            })
        })
        .collect()
}
