//! Shared domain types: binary state vectors, missingness masks and RBM
//! parameters.

use ndarray::{Array1, Array2, CowArray, Ix2};

use crate::error::{Error, Result};

/// A vector of {0,1} unit states (visible or hidden layer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVector {
    bits: Array1<u8>,
}

impl BinaryVector {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidConfig(
                "binary vector entries must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            bits: Array1::from_vec(bits),
        })
    }

    /// Builds from raw bits without validating. Callers must guarantee 0/1.
    pub(crate) fn from_bits_unchecked(bits: Array1<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bits: Array1::zeros(len),
        }
    }

    pub fn bits(&self) -> &Array1<u8> {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_f64(&self) -> Array1<f64> {
        self.bits.mapv(f64::from)
    }
}

/// Per-unit missingness indicator. Convention: 1 = missing, 0 = observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    missing: Array1<u8>,
}

impl Mask {
    pub fn from_missing(missing: Vec<u8>) -> Result<Self> {
        if missing.iter().any(|&b| b > 1) {
            return Err(Error::InvalidConfig(
                "mask entries must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            missing: Array1::from_vec(missing),
        })
    }

    pub(crate) fn from_missing_unchecked(missing: Array1<u8>) -> Self {
        debug_assert!(missing.iter().all(|&b| b <= 1));
        Self { missing }
    }

    /// Mask with every unit observed.
    pub fn all_observed(len: usize) -> Self {
        Self {
            missing: Array1::zeros(len),
        }
    }

    /// Mask with every unit missing.
    pub fn all_missing(len: usize) -> Self {
        Self {
            missing: Array1::ones(len),
        }
    }

    pub fn missing(&self) -> &Array1<u8> {
        &self.missing
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_all_observed(&self) -> bool {
        self.missing_count() == 0
    }

    /// Indicator of missing units as f64 (m in the update formulas).
    pub fn missing_f64(&self) -> Array1<f64> {
        self.missing.mapv(f64::from)
    }

    /// Indicator of observed units as f64 (1 - m).
    pub fn observed_f64(&self) -> Array1<f64> {
        self.missing.mapv(|b| f64::from(1 - b))
    }
}

/// Probabilities in [0,1], typically sigmoid outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Array1<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidConfig(
                "probabilities must lie in [0,1]".into(),
            ));
        }
        Ok(Self { probs })
    }

    pub(crate) fn new_unchecked(probs: Array1<f64>) -> Self {
        debug_assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        Self { probs }
    }

    pub fn probs(&self) -> &Array1<f64> {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.probs
    }
}

/// Weight storage: dense n x m, or a rank-r factorization W = A . B.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Dense(Array2<f64>),
    Factored { a: Array2<f64>, b: Array2<f64> },
}

impl Weights {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Weights::Dense(w) => (w.nrows(), w.ncols()),
            Weights::Factored { a, b } => (a.nrows(), b.ncols()),
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            Weights::Dense(_) => None,
            Weights::Factored { a, .. } => Some(a.ncols()),
        }
    }
}

/// Full parameter set of an RBM trained on incomplete data.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    /// Visible biases b, length n.
    pub visible_bias: Array1<f64>,
    /// Hidden biases c, length m.
    pub hidden_bias: Array1<f64>,
    /// Connection weights, effective shape n x m.
    pub weights: Weights,
    /// Per-visible-unit observation probabilities, length n, each in [0,1].
    pub lambda: Array1<f64>,
}

impl RbmParams {
    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    /// Dense parameters with lambda defaulted to all-ones.
    pub fn new_dense(
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
        weights: Array2<f64>,
    ) -> Result<Self> {
        let p = Self {
            lambda: Array1::ones(visible_bias.len()),
            visible_bias,
            hidden_bias,
            weights: Weights::Dense(weights),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_visible();
        let m = self.n_hidden();
        let (wn, wm) = self.weights.shape();
        if wn != n {
            return Err(Error::dim("weight rows vs visible bias", n, wn));
        }
        if wm != m {
            return Err(Error::dim("weight cols vs hidden bias", m, wm));
        }
        if let Weights::Factored { a, b } = &self.weights {
            let r = a.ncols();
            if r != b.nrows() {
                return Err(Error::dim("factor inner dims", a.ncols(), b.nrows()));
            }
            if r == 0 || r > n.min(m) {
                return Err(Error::InvalidConfig(format!(
                    "factor rank {r} outside [1, {}]",
                    n.min(m)
                )));
            }
        }
        if self.lambda.len() != n {
            return Err(Error::dim("lambda length", n, self.lambda.len()));
        }
        if self.lambda.iter().any(|&l| !(0.0..=1.0).contains(&l)) {
            return Err(Error::InvalidConfig(
                "lambda entries must lie in [0,1]".into(),
            ));
        }
        let finite = self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
            && match &self.weights {
                Weights::Dense(w) => w.iter().all(|v| v.is_finite()),
                Weights::Factored { a, b } => {
                    a.iter().all(|v| v.is_finite()) && b.iter().all(|v| v.is_finite())
                }
            };
        if !finite {
            return Err(Error::NonFinite("rbm parameters"));
        }
        Ok(())
    }

    /// The effective n x m weight matrix: W itself, or the product A . B.
    pub fn effective_weights(&self) -> CowArray<'_, f64, Ix2> {
        match &self.weights {
            Weights::Dense(w) => CowArray::from(w.view()),
            Weights::Factored { a, b } => CowArray::from(a.dot(b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn binary_vector_rejects_non_bits() {
        assert!(BinaryVector::from_bits(vec![0, 1, 2]).is_err());
        assert!(BinaryVector::from_bits(vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn mask_counts() {
        let m = Mask::from_missing(vec![1, 0, 1]).unwrap();
        assert_eq!(m.missing_count(), 2);
        assert_eq!(m.observed_f64(), array![0.0, 1.0, 0.0]);
    }

    #[test]
    fn effective_weights_dense_and_factored() {
        let w = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let p = RbmParams::new_dense(Array1::zeros(3), Array1::zeros(2), w.clone()).unwrap();
        assert_eq!(p.effective_weights().to_owned(), w);

        // A formed of identity columns places rows of B accordingly.
        let a = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        let b = array![[7.0, 8.0], [9.0, 10.0]];
        let p = RbmParams {
            visible_bias: Array1::zeros(3),
            hidden_bias: Array1::zeros(2),
            weights: Weights::Factored { a, b },
            lambda: Array1::ones(3),
        };
        p.validate().unwrap();
        let eff = p.effective_weights().to_owned();
        assert_eq!(eff, array![[7.0, 8.0], [9.0, 10.0], [0.0, 0.0]]);
    }

    #[test]
    fn factored_zero_a_gives_zero_matrix() {
        let p = RbmParams {
            visible_bias: Array1::zeros(2),
            hidden_bias: Array1::zeros(2),
            weights: Weights::Factored {
                a: Array2::zeros((2, 1)),
                b: Array2::ones((1, 2)),
            },
            lambda: Array1::ones(2),
        };
        assert!(p.effective_weights().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn validate_rejects_bad_rank_and_lambda() {
        let mut p = RbmParams {
            visible_bias: Array1::zeros(2),
            hidden_bias: Array1::zeros(3),
            weights: Weights::Factored {
                a: Array2::zeros((2, 3)),
                b: Array2::zeros((3, 3)),
            },
            lambda: Array1::ones(2),
        };
        assert!(p.validate().is_err()); // rank 3 > min(2,3)
        p.weights = Weights::Dense(Array2::zeros((2, 3)));
        p.lambda[0] = 1.5;
        assert!(p.validate().is_err());
    }
}
