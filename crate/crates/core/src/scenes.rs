//! Synthetic piecewise-polynomial test scenes with known region boundaries.

use ndarray::Array2;

use crate::edges::EdgeMap;
use crate::model::Image;
use crate::scalar::Scalar;

/// An image together with the region label of every pixel.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub image: Image<T>,
    pub labels: Array2<u8>,
}

impl<T: Scalar> Scene<T> {
    /// Pixels with a 4-neighbour in a different region: a two-pixel band along
    /// every boundary.
    pub fn boundary(&self) -> EdgeMap {
        let (rows, cols) = self.labels.dim();
        let l = &self.labels;
        let mask = Array2::from_shape_fn((rows, cols), |(m, n)| {
            let here = l[[m, n]];
            (m > 0 && l[[m - 1, n]] != here)
                || (m + 1 < rows && l[[m + 1, n]] != here)
                || (n > 0 && l[[m, n - 1]] != here)
                || (n + 1 < cols && l[[m, n + 1]] != here)
        });
        EdgeMap::new(mask, 0.0)
    }
}

/// Four quadratic patches split by one horizontal boundary (before row `rows/2`) and
/// one vertical boundary (before column `cols/2`). Intensities stay within 0..255.
pub fn quadrant_scene<T: Scalar>(rows: usize, cols: usize) -> Scene<T> {
    let (r0, c0) = (rows / 2, cols / 2);
    let labels = Array2::from_shape_fn((rows, cols), |(m, n)| {
        u8::from(m >= r0) * 2 + u8::from(n >= c0)
    });
    let ty = |m: usize| m as f64 / (rows.max(2) - 1) as f64;
    let tx = |n: usize| n as f64 / (cols.max(2) - 1) as f64;
    let image = Array2::from_shape_fn((rows, cols), |(m, n)| {
        let (t, s) = (ty(m), tx(n));
        let v = match labels[[m, n]] {
            0 => 70.0 + 40.0 * t + 30.0 * s * s,
            1 => 170.0 - 30.0 * s + 40.0 * t * t,
            2 => 150.0 + 40.0 * (s - 0.3).powi(2) - 20.0 * t,
            _ => 50.0 + 60.0 * t * s + 20.0 * s,
        };
        T::of(v)
    });
    Scene { image, labels }
}

/// Two flat regions, left and right of column `split`.
pub fn step_scene<T: Scalar>(
    rows: usize,
    cols: usize,
    split: usize,
    low: f64,
    high: f64,
) -> Scene<T> {
    let labels = Array2::from_shape_fn((rows, cols), |(_, n)| u8::from(n >= split));
    let image = labels.mapv(|l| T::of(if l == 1 { high } else { low }));
    Scene { image, labels }
}
