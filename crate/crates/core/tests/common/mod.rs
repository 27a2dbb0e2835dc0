#![allow(dead_code)]

use ndarray::{Array2, Array3, ArrayView2};
use polyedge::{BasisKind, CoefficientField64, SynthesisOperator64};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn array3(&mut self, shape: (usize, usize, usize)) -> Array3<f64> {
        Array3::from_shape_simple_fn(shape, || self.uniform(-1.0, 1.0))
    }

    pub fn array2(&mut self, shape: (usize, usize)) -> Array2<f64> {
        Array2::from_shape_simple_fn(shape, || self.uniform(-1.0, 1.0))
    }

    pub fn field(&mut self, degree: usize, m: usize, n: usize) -> CoefficientField64 {
        let g = (degree + 1) * (degree + 1);
        CoefficientField64::from_maps(degree, self.array3((g, m, n))).unwrap()
    }
}

/// Column-major vectorization.
pub fn vec_cm(a: ArrayView2<f64>) -> Vec<f64> {
    a.t().iter().copied().collect()
}

/// Column-major vectorization of each map, maps concatenated.
pub fn vec_maps_cm(a: &Array3<f64>) -> Vec<f64> {
    a.outer_iter().flat_map(|m| vec_cm(m)).collect()
}

/// Row-major vectorization of each map, maps concatenated.
pub fn vec_maps_rm(a: &Array3<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

pub fn basis_images_cm(op: &SynthesisOperator64) -> Vec<Vec<f64>> {
    op.basis()
        .images()
        .outer_iter()
        .map(|m| vec_cm(m))
        .collect()
}

pub fn op(degree: usize, m: usize, n: usize, kind: BasisKind) -> SynthesisOperator64 {
    SynthesisOperator64::for_image(degree, m, n, kind).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    diff / scale
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
