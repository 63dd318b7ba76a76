use crate::error::{Error, Result};

/// Dense row-major buffer with an optional gradient of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub values: Vec<T>,
    pub grad: Option<Vec<T>>,
}

impl<T: Copy + Default> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), values: vec![T::default(); shape.iter().product()], grad: None }
    }

    pub fn from_vec(shape: &[usize], values: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::ShapeMismatch { expected: format!("{shape:?} ({n} values)"), got: format!("{} values", values.len()) });
        }
        Ok(Self { shape: shape.to_vec(), values, grad: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Shape collapsed to `(shape[0], product of the rest)`.
    pub fn matrix_dims(&self) -> (usize, usize) {
        match self.shape.split_first() {
            Some((&r, rest)) => (r, rest.iter().product()),
            None => (1, 1),
        }
    }
}
