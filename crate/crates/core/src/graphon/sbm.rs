use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::asymmetry;

/// Stochastic block model: symmetric block connection probabilities, block
/// sizes (contiguous, in order) and the sampling seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmSpec {
    block_probs: DMatrix<f64>,
    block_sizes: Vec<usize>,
    seed: u64,
}

impl SbmSpec {
    pub fn new(block_probs: DMatrix<f64>, block_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let k = block_probs.nrows();
        if !block_probs.is_square() || k == 0 {
            return Err(Error::Construction(
                "block probability matrix must be square and non-empty".into(),
            ));
        }
        if block_sizes.len() != k {
            return Err(Error::Construction(format!(
                "{} block sizes for {k} blocks",
                block_sizes.len()
            )));
        }
        if block_sizes.contains(&0) {
            return Err(Error::Construction("block sizes must be positive".into()));
        }
        if asymmetry(&block_probs) != 0.0 {
            return Err(Error::Construction(
                "block probability matrix is not symmetric".into(),
            ));
        }
        if block_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Construction(
                "block probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            block_probs,
            block_sizes,
            seed,
        })
    }

    /// `size` nodes split as evenly as possible, earlier blocks taking the remainder.
    pub fn equal_blocks(block_probs: DMatrix<f64>, size: usize, seed: u64) -> Result<Self> {
        let k = block_probs.nrows().max(1);
        let sizes = (0..k)
            .map(|b| size / k + usize::from(b < size % k))
            .collect();
        Self::new(block_probs, sizes, seed)
    }

    pub fn size(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn block_probs(&self) -> &DMatrix<f64> {
        &self.block_probs
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Block index of every node.
    pub fn membership(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    /// The limiting step graphon: `W_ij = p(block(i), block(j))`, diagonal included.
    pub fn expected_weights(&self) -> DMatrix<f64> {
        let member = self.membership();
        let n = member.len();
        DMatrix::from_fn(n, n, |i, j| self.block_probs[(member[i], member[j])])
    }
}

/// Draws a symmetric 0/1 adjacency matrix with zero diagonal. Pairs `i < j`
/// are visited row by row, one uniform draw each, so the result is a pure
/// function of the spec.
pub fn sample_sbm(spec: &SbmSpec) -> DMatrix<f64> {
    let member = spec.membership();
    let n = member.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = spec.block_probs[(member[i], member[j])];
            let draw: f64 = rng.random();
            if draw < p {
                adj[(i, j)] = 1.0;
                adj[(j, i)] = 1.0;
            }
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_and_impossible_edges() {
        let full = SbmSpec::new(DMatrix::from_element(1, 1, 1.0), vec![3], 1).unwrap();
        let adj = sample_sbm(&full);
        assert_eq!(adj, DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 }));

        let empty = SbmSpec::new(DMatrix::from_element(1, 1, 0.0), vec![5], 1).unwrap();
        assert_eq!(sample_sbm(&empty), DMatrix::zeros(5, 5));
    }

    #[test]
    fn equal_blocks_distribute_remainder() {
        let spec = SbmSpec::equal_blocks(DMatrix::from_element(3, 3, 0.5), 10, 0).unwrap();
        assert_eq!(spec.block_sizes(), &[4, 3, 3]);
        assert_eq!(spec.size(), 10);
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(SbmSpec::new(DMatrix::from_element(1, 1, 1.5), vec![2], 0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.1]);
        assert!(SbmSpec::new(asym, vec![2, 2], 0).is_err());
    }
}
