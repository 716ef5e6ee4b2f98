//! Minimal dense tensor used by the network: f64 storage, shape vector,
//! row-major layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![v; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Shape [C, H, W] accessor used by the layer code.
    pub fn dims3(&self) -> (usize, usize, usize) {
        assert_eq!(
            self.shape.len(),
            3,
            "expected a C,H,W tensor, got {:?}",
            self.shape
        );
        (self.shape[0], self.shape[1], self.shape[2])
    }

    /// Shape [O, I, K, K] accessor for conv weights.
    pub fn dims4(&self) -> (usize, usize, usize, usize) {
        assert_eq!(
            self.shape.len(),
            4,
            "expected an O,I,K,K tensor, got {:?}",
            self.shape
        );
        (self.shape[0], self.shape[1], self.shape[2], self.shape[3])
    }
}

/// Fan-in of a parameter tensor: product of all but the leading
/// (output) dimension, or the length itself for vectors.
pub fn fan_in(shape: &[usize]) -> Result<usize> {
    match shape.len() {
        0 => Err(Error::InvalidArgument(
            "fan-in undefined for a scalar shape".into(),
        )),
        1 => Ok(shape[0]),
        _ => Ok(shape[1..].iter().product()),
    }
}

/// He-normal initialization: samples from N(0, sqrt(2 / fan_in)),
/// deterministic in the seed.
pub fn he_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    let fan = fan_in(shape)?;
    if fan == 0 {
        return Err(Error::InvalidArgument("fan-in must be nonzero".into()));
    }
    let std = (2.0 / fan as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("std is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_std(t: &Tensor) -> f64 {
        let n = t.numel() as f64;
        let mean: f64 = t.data().iter().sum::<f64>() / n;
        (t.data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n)
            .sqrt()
    }

    // Statistical oracle: empirical std over 18k draws within 5% of
    // sqrt(2 / (32 * 9)).
    #[test]
    fn he_init_std_matches_fan_in() {
        let t = he_init(&[64, 32, 3, 3], 9).unwrap();
        let expected = (2.0f64 / (32.0 * 9.0)).sqrt();
        let got = sample_std(&t);
        assert!(
            (got - expected).abs() / expected < 0.05,
            "std {got} vs {expected}"
        );
    }

    #[test]
    fn he_init_is_deterministic() {
        let a = he_init(&[8, 4, 3, 3], 123).unwrap();
        let b = he_init(&[8, 4, 3, 3], 123).unwrap();
        assert_eq!(a.data(), b.data());
        let c = he_init(&[8, 4, 3, 3], 124).unwrap();
        assert_ne!(a.data(), c.data());
    }

    // Doubling fan-in should halve the variance.
    #[test]
    fn he_init_variance_scales_with_fan_in() {
        let narrow = he_init(&[32, 16, 3, 3], 7).unwrap();
        let wide = he_init(&[32, 32, 3, 3], 7).unwrap();
        let ratio = sample_std(&narrow).powi(2) / sample_std(&wide).powi(2);
        assert!((ratio - 2.0).abs() < 0.2, "variance ratio {ratio}");
    }

    #[test]
    fn fan_in_shapes() {
        assert_eq!(fan_in(&[64, 32, 3, 3]).unwrap(), 288);
        assert_eq!(fan_in(&[10, 4]).unwrap(), 4);
        assert_eq!(fan_in(&[5]).unwrap(), 5);
        assert!(fan_in(&[]).is_err());
    }
}
