use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major array with an explicit shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn new(shape: Vec<usize>, data: Vec<F>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape {
                expected: format!("{len} values for shape {shape:?}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![F::zero(); len] }
    }

    /// Pixels scaled into [0, 1].
    pub fn from_pixels(shape: Vec<usize>, pixels: &[u8]) -> Result<Self> {
        Self::new(shape, pixels.iter().map(|&p| F::of(p as f64 / 255.0)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_must_match_shape() {
        assert!(Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::from_pixels(vec![1, 2], &[0, 255]).unwrap();
        assert_eq!(t.data(), &[0.0, 1.0]);
        assert!(t.is_finite());
    }
}
