//! Dense row-major tensors over f32 or f64.
//!
//! Weights and activations train in f32; the generic parameter exists so
//! the exact same layer code can be instantiated in f64 for
//! finite-difference gradient verification.

use num_traits::Float;

/// Scalar types the engine runs on. `to_acc`/`from_acc` convert to the
/// 64-bit accumulator used for every reduction.
pub trait Element: Float + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static {
    fn to_acc(self) -> f64;
    fn from_acc(x: f64) -> Self;
}

impl Element for f32 {
    #[inline(always)]
    fn to_acc(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn from_acc(x: f64) -> Self {
        x as f32
    }
}

impl Element for f64 {
    #[inline(always)]
    fn to_acc(self) -> f64 {
        self
    }
    #[inline(always)]
    fn from_acc(x: f64) -> Self {
        x
    }
}

/// A shape-tagged row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); numel] }
    }

    /// Panics if `data` does not fill `shape` exactly.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} elements",
            data.len()
        );
        Tensor { shape: shape.to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Same buffer under a new shape with identical element count.
    pub fn reshaped(&self, shape: &[usize]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        Tensor { shape: shape.to_vec(), data: self.data.clone() }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Convert between element types (used to lift f32 networks into f64 for
/// gradient checking).
pub fn convert<A: Element, B: Element>(t: &Tensor<A>) -> Tensor<B> {
    Tensor::from_vec(t.shape(), t.data().iter().map(|&v| B::from_acc(v.to_acc())).collect())
}
