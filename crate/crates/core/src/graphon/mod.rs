//! Graphon coupling operators on `L²[0,1]`.
//!
//! Two representations are supported:
//!
//! * [`StepGraphon`]: the piecewise-constant kernel of an `N × N` network
//!   matrix. Acting on a [`GridFunction`] of the same resolution it is exactly
//!   the network coupling `(1/N) W x`.
//! * [`DictionaryGraphon`]: a finite symmetric expansion over the orthonormal
//!   trigonometric family. Projections onto dictionary bases are computed
//!   from the coefficients, without quadrature. On a grid the dictionary is
//!   sampled at interval midpoints.

mod dictionary;
mod grid;
mod sbm;
mod step;

use nalgebra::DMatrix;

pub use dictionary::{DictionaryGraphon, TrigFunction};
pub use grid::GridFunction;
pub use sbm::{sample_sbm, SbmSpec};
pub use step::StepGraphon;

pub(crate) use dictionary::{embedding, sample_matrix, union, validate_dictionary};

use crate::error::{Error, Result};
use crate::linalg::{sorted_eigen, symmetrize};
use crate::subspace::{pair, Pairing, SubspaceBasis};

/// A bounded symmetric coupling kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum Graphon {
    Step(StepGraphon),
    Dictionary(DictionaryGraphon),
}

/// Leading eigenpairs of a graphon operator.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: SubspaceBasis,
}

impl From<StepGraphon> for Graphon {
    fn from(g: StepGraphon) -> Self {
        Graphon::Step(g)
    }
}

impl From<DictionaryGraphon> for Graphon {
    fn from(g: DictionaryGraphon) -> Self {
        Graphon::Dictionary(g)
    }
}

/// Embeds a finite network as a step graphon.
pub fn step_from_matrix(weights: DMatrix<f64>, bound: f64) -> Result<Graphon> {
    StepGraphon::from_matrix(weights, bound).map(Graphon::Step)
}

impl Graphon {
    /// The zero kernel (an empty dictionary expansion).
    pub fn zero() -> Self {
        Graphon::Dictionary(DictionaryGraphon::zero())
    }

    /// Grid resolution fixed by the representation, if any.
    pub fn grid_size(&self) -> Option<usize> {
        match self {
            Graphon::Step(s) => Some(s.grid_size()),
            Graphon::Dictionary(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Graphon::Step(s) => s.weights().iter().all(|w| *w == 0.0),
            Graphon::Dictionary(d) => d.coeffs().iter().all(|w| *w == 0.0),
        }
    }

    /// The `N × N` matrix `K` with `(𝐀v)ᵢ = Σⱼ Kᵢⱼ vⱼ` on an `N`-grid.
    pub fn kernel_on_grid(&self, grid_size: usize) -> Result<DMatrix<f64>> {
        match self {
            Graphon::Step(s) => {
                check_grid(s.grid_size(), grid_size)?;
                Ok(s.kernel())
            }
            Graphon::Dictionary(d) => {
                let phi = sample_matrix(d.dictionary(), grid_size);
                let w = &phi * d.coeffs() * phi.transpose();
                Ok(symmetrize(&w) / grid_size as f64)
            }
        }
    }

    /// The step graphon seen by an `N`-agent network.
    pub fn to_step(&self, grid_size: usize) -> Result<StepGraphon> {
        match self {
            Graphon::Step(s) => {
                check_grid(s.grid_size(), grid_size)?;
                Ok(s.clone())
            }
            Graphon::Dictionary(_) => {
                let w = self.kernel_on_grid(grid_size)? * grid_size as f64;
                StepGraphon::from_matrix_unbounded(symmetrize(&w))
            }
        }
    }

    /// Applies the integral operator (no local matrix) to each component.
    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        let size = v.grid_size();
        match self {
            Graphon::Step(s) => {
                check_grid(s.grid_size(), size)?;
                GridFunction::new(s.kernel() * v.values())
            }
            Graphon::Dictionary(d) => {
                if d.dictionary().is_empty() {
                    return Ok(GridFunction::zeros(size, v.dim()));
                }
                let phi = sample_matrix(d.dictionary(), size);
                let moments = phi.transpose() * v.values() / size as f64;
                GridFunction::new(&phi * (d.coeffs() * moments))
            }
        }
    }

    /// All eigenvalues, sorted by decreasing magnitude.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Graphon::Step(s) => sorted_eigen(&s.kernel()).0,
            Graphon::Dictionary(d) => sorted_eigen(d.coeffs()).0,
        }
    }

    /// The `count` leading eigenpairs. Eigenvalues are ordered by decreasing
    /// `|λ|`, then decreasing `λ`; eigenfunctions are orthonormal in `L²`.
    pub fn spectral_decomposition(&self, count: usize) -> Result<Spectrum> {
        let available = match self {
            Graphon::Step(s) => s.grid_size(),
            Graphon::Dictionary(d) => d.dictionary().len(),
        };
        if count == 0 || count > available {
            return Err(Error::Range(format!(
                "requested {count} eigenpairs from an operator with {available} available"
            )));
        }
        match self {
            Graphon::Step(s) => {
                let size = s.grid_size();
                let (values, vectors) = sorted_eigen(&s.kernel());
                let functions = vectors.columns(0, count) * (size as f64).sqrt();
                Ok(Spectrum {
                    eigenvalues: values[..count].to_vec(),
                    eigenfunctions: SubspaceBasis::from_orthonormal_grid(functions)?,
                })
            }
            Graphon::Dictionary(d) => {
                let (values, vectors) = sorted_eigen(d.coeffs());
                Ok(Spectrum {
                    eigenvalues: values[..count].to_vec(),
                    eigenfunctions: SubspaceBasis::from_dictionary_combination(
                        d.dictionary().to_vec(),
                        vectors.columns(0, count).into_owned(),
                    )?,
                })
            }
        }
    }

    /// `‖𝐀‖_op = max |λ|` (self-adjoint operator).
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().first().map_or(0.0, |l| l.abs())
    }

    /// `𝐀_{𝒮⊥} = 𝐀 − P𝐀P` with `P` the orthogonal projector onto the span of
    /// `basis`.
    pub fn residual(&self, basis: &SubspaceBasis) -> Result<Graphon> {
        match pair(self, basis)? {
            Pairing::Analytic {
                dictionary,
                kernel,
                basis: c,
            } => {
                let p = &c * c.transpose();
                let r = &kernel - &p * &kernel * &p;
                Ok(Graphon::Dictionary(DictionaryGraphon::new(
                    dictionary,
                    symmetrize(&r),
                )?))
            }
            Pairing::Grid { kernel, basis: f } => {
                let size = kernel.nrows() as f64;
                let w = kernel * size;
                let p = &f * f.transpose() / size;
                let r = &w - &p * &w * &p;
                Ok(Graphon::Step(StepGraphon::from_matrix_unbounded(symmetrize(
                    &r,
                ))?))
            }
        }
    }

    /// Kernel of the composition `𝐀 ∘ 𝐀`.
    pub fn square(&self) -> Graphon {
        match self {
            Graphon::Step(s) => {
                let w = s.weights() * s.weights() / s.grid_size() as f64;
                Graphon::Step(
                    StepGraphon::from_matrix_unbounded(symmetrize(&w))
                        .expect("square of a valid step graphon is valid"),
                )
            }
            Graphon::Dictionary(d) => {
                let m = d.coeffs() * d.coeffs();
                Graphon::Dictionary(
                    DictionaryGraphon::new(d.dictionary().to_vec(), symmetrize(&m))
                        .expect("square of a valid dictionary graphon is valid"),
                )
            }
        }
    }

    /// `a·self + b·other`. Mixed representations are combined on the step grid.
    pub fn combine(&self, a: f64, other: &Graphon, b: f64) -> Result<Graphon> {
        match (self, other) {
            (Graphon::Dictionary(x), Graphon::Dictionary(y)) => {
                let dict = union(x.dictionary(), y.dictionary());
                let m = x.embed(&dict) * a + y.embed(&dict) * b;
                Ok(Graphon::Dictionary(DictionaryGraphon::new(dict, symmetrize(&m))?))
            }
            _ => {
                let size = self.grid_size().or(other.grid_size()).expect("one side is a step graphon");
                let w = self.to_step(size)?.weights() * a + other.to_step(size)?.weights() * b;
                Ok(Graphon::Step(StepGraphon::from_matrix_unbounded(symmetrize(&w))?))
            }
        }
    }

    /// Largest kernel magnitude of the representation.
    pub fn bound(&self) -> f64 {
        match self {
            Graphon::Step(s) => s.bound(),
            Graphon::Dictionary(d) => {
                // |Σ M f f| ≤ Σ |M| · 2 since |f| ≤ √2
                d.coeffs().iter().map(|v| v.abs()).sum::<f64>() * 2.0
            }
        }
    }
}

fn check_grid(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension(format!(
            "step graphon has {expected} intervals, grid has {actual}"
        )));
    }
    Ok(())
}
