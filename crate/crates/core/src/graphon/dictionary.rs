use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::asymmetry;

/// One element of the orthonormal trigonometric family
/// `{𝟏, √2 sin(2πk·), √2 cos(2πk·) : k ≥ 1}` on `L²[0,1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrigFunction {
    One,
    Sin(u32),
    Cos(u32),
}

impl TrigFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TrigFunction::One => 1.0,
            TrigFunction::Sin(k) => SQRT_2 * (2.0 * PI * k as f64 * x).sin(),
            TrigFunction::Cos(k) => SQRT_2 * (2.0 * PI * k as f64 * x).cos(),
        }
    }

    pub fn frequency(&self) -> u32 {
        match *self {
            TrigFunction::One => 0,
            TrigFunction::Sin(k) | TrigFunction::Cos(k) => k,
        }
    }

    /// Values at the midpoints `(i + ½)/N` of the uniform partition.
    ///
    /// For `N > 2k` the sampled family stays exactly orthonormal under the
    /// Riemann inner product (discrete Fourier orthogonality).
    pub fn sample(&self, grid_size: usize) -> Vec<f64> {
        (0..grid_size)
            .map(|i| self.eval((i as f64 + 0.5) / grid_size as f64))
            .collect()
    }
}

impl fmt::Display for TrigFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrigFunction::One => write!(f, "one"),
            TrigFunction::Sin(k) => write!(f, "sin{k}"),
            TrigFunction::Cos(k) => write!(f, "cos{k}"),
        }
    }
}

impl FromStr for TrigFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" || s == "1" {
            return Ok(TrigFunction::One);
        }
        let parse_k = |rest: &str| -> Result<u32> {
            match rest.parse::<u32>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(Error::Construction(format!(
                    "bad trigonometric dictionary element `{s}`"
                ))),
            }
        };
        if let Some(rest) = s.strip_prefix("sin") {
            Ok(TrigFunction::Sin(parse_k(rest)?))
        } else if let Some(rest) = s.strip_prefix("cos") {
            Ok(TrigFunction::Cos(parse_k(rest)?))
        } else {
            Err(Error::Construction(format!(
                "bad trigonometric dictionary element `{s}` (expected one, sinK or cosK)"
            )))
        }
    }
}

/// Rejects repeated or degenerate dictionary entries, which is all that is
/// needed for the family to be orthonormal.
pub(crate) fn validate_dictionary(functions: &[TrigFunction]) -> Result<()> {
    for (i, f) in functions.iter().enumerate() {
        if matches!(f, TrigFunction::Sin(0) | TrigFunction::Cos(0)) {
            return Err(Error::Construction(format!("{f:?} is not in the dictionary")));
        }
        if functions[..i].contains(f) {
            return Err(Error::Construction(format!("dictionary element {f} repeated")));
        }
    }
    Ok(())
}

/// Midpoint samples of a dictionary as an `N × K` matrix.
pub(crate) fn sample_matrix(functions: &[TrigFunction], grid_size: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(grid_size, functions.len());
    for (k, f) in functions.iter().enumerate() {
        for (i, v) in f.sample(grid_size).into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    out
}

/// A graphon `𝐀(x,y) = Σ_{ℓ,k} M_{ℓk} f_ℓ(x) f_k(y)` over a trigonometric
/// dictionary.
#[derive(Clone, Debug, PartialEq)]
pub struct DictionaryGraphon {
    dictionary: Vec<TrigFunction>,
    coeffs: DMatrix<f64>,
}

impl DictionaryGraphon {
    pub fn new(dictionary: Vec<TrigFunction>, coeffs: DMatrix<f64>) -> Result<Self> {
        validate_dictionary(&dictionary)?;
        if coeffs.nrows() != dictionary.len() || coeffs.ncols() != dictionary.len() {
            return Err(Error::Construction(format!(
                "coefficient matrix is {}x{} for a dictionary of {} functions",
                coeffs.nrows(),
                coeffs.ncols(),
                dictionary.len()
            )));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Construction("non-finite coefficient".into()));
        }
        if asymmetry(&coeffs) != 0.0 {
            return Err(Error::Construction(
                "dictionary coefficient matrix is not symmetric".into(),
            ));
        }
        Ok(Self { dictionary, coeffs })
    }

    pub fn zero() -> Self {
        Self {
            dictionary: Vec::new(),
            coeffs: DMatrix::zeros(0, 0),
        }
    }

    pub fn dictionary(&self) -> &[TrigFunction] {
        &self.dictionary
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let fx: Vec<f64> = self.dictionary.iter().map(|f| f.eval(x)).collect();
        let fy: Vec<f64> = self.dictionary.iter().map(|f| f.eval(y)).collect();
        let mut total = 0.0;
        for (l, a) in fx.iter().enumerate() {
            for (k, b) in fy.iter().enumerate() {
                total += self.coeffs[(l, k)] * a * b;
            }
        }
        total
    }

    pub fn max_frequency(&self) -> u32 {
        self.dictionary.iter().map(|f| f.frequency()).max().unwrap_or(0)
    }

    /// Coefficients re-expressed over a larger dictionary that contains this one.
    pub(crate) fn embed(&self, target: &[TrigFunction]) -> DMatrix<f64> {
        let index = embedding(&self.dictionary, target);
        let mut out = DMatrix::zeros(target.len(), target.len());
        for (a, &ia) in index.iter().enumerate() {
            for (b, &ib) in index.iter().enumerate() {
                out[(ia, ib)] = self.coeffs[(a, b)];
            }
        }
        out
    }
}

/// Position of each element of `source` inside `target`.
pub(crate) fn embedding(source: &[TrigFunction], target: &[TrigFunction]) -> Vec<usize> {
    source
        .iter()
        .map(|f| {
            target
                .iter()
                .position(|g| g == f)
                .expect("target dictionary must contain the source dictionary")
        })
        .collect()
}

/// Order-preserving union of two dictionaries.
pub(crate) fn union(a: &[TrigFunction], b: &[TrigFunction]) -> Vec<TrigFunction> {
    let mut out = a.to_vec();
    for f in b {
        if !out.contains(f) {
            out.push(*f);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        assert_eq!("sin2".parse::<TrigFunction>().unwrap(), TrigFunction::Sin(2));
        assert_eq!("one".parse::<TrigFunction>().unwrap(), TrigFunction::One);
        assert!("sin0".parse::<TrigFunction>().is_err());
        assert!("tan1".parse::<TrigFunction>().is_err());
    }

    #[test]
    fn sampled_family_is_orthonormal() {
        let dict = [
            TrigFunction::One,
            TrigFunction::Sin(1),
            TrigFunction::Cos(1),
            TrigFunction::Sin(3),
        ];
        let n = 40;
        let phi = sample_matrix(&dict, n);
        let gram = phi.transpose() * &phi / n as f64;
        let err = (gram - DMatrix::identity(4, 4)).amax();
        assert!(err < 1e-13, "gram error {err}");
    }

    #[test]
    fn rejects_asymmetric_or_repeated() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(DictionaryGraphon::new(vec![TrigFunction::Sin(1), TrigFunction::Cos(1)], m).is_err());
        let m = DMatrix::identity(2, 2);
        assert!(DictionaryGraphon::new(vec![TrigFunction::Sin(1), TrigFunction::Sin(1)], m).is_err());
    }

    #[test]
    fn kernel_evaluation_matches_closed_form() {
        // cos(2π(x+y)) = ½ f_c(x) f_c(y) − ½ f_s(x) f_s(y)
        let g = DictionaryGraphon::new(
            vec![TrigFunction::Sin(1), TrigFunction::Cos(1)],
            DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 0.5]),
        )
        .unwrap();
        for &(x, y) in &[(0.1, 0.7), (0.33, 0.9), (0.0, 0.25)] {
            let expected = (2.0 * PI * (x + y)).cos();
            assert!((g.eval(x, y) - expected).abs() < 1e-14);
        }
    }
}
