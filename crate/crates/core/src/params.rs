//! Flat views over model parameters, shared by the optimizer, gradient
//! accumulation and checkpointing.

use ndarray::{ArrayBase, Data, Dimension};

use crate::scalar::Scalar;

/// A named, shaped, contiguous parameter tensor.
#[derive(Debug)]
pub struct Tensor<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

impl<'a, T> Tensor<'a, T> {
    pub fn new<S, D>(name: String, array: &'a ArrayBase<S, D>) -> Self
    where
        S: Data<Elem = T>,
        D: Dimension,
    {
        Tensor {
            name,
            shape: array.shape().to_vec(),
            data: array.as_slice().expect("parameters are stored in standard layout"),
        }
    }
}

/// A collection of parameter tensors with a fixed order.
///
/// `tensors` and `tensors_mut` must enumerate the same tensors in the same order.
pub trait ParamSet<T: Scalar> {
    fn tensors(&self) -> Vec<Tensor<'_, T>>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    fn add_assign_from(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            for (d, &s) in dst.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    fn scale(&mut self, factor: T) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn squared_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|&v| v * v)
            .sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Copies every value into one flat vector in tensor order.
    fn to_flat(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .collect()
    }
}
