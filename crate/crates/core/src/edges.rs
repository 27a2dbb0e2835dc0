//! Sobel gradients, thresholding and the two edge extractors built on a solved
//! coefficient field.

use ndarray::{Array2, Axis, Zip};

use crate::error::{Error, Result};
use crate::model::{CoefficientField, Image, SynthesisOperator};
use crate::scalar::Scalar;

/// Horizontal-derivative Sobel kernel; the vertical kernel is its transpose.
pub const SOBEL_X: [[i32; 3]; 3] = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];

/// Nonnegative gradient magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMap<T> {
    values: Array2<T>,
    normalized: bool,
}

impl<T: Scalar> GradMap<T> {
    /// Wraps raw magnitudes without normalizing.
    pub fn raw(values: Array2<T>) -> Self {
        Self {
            values,
            normalized: false,
        }
    }

    /// Divides by the maximum so it becomes one; an all-zero map stays zero.
    pub fn normalize(mut self) -> Self {
        let max = self.values.iter().copied().fold(T::zero(), T::max);
        if max > T::zero() {
            self.values.mapv_inplace(|v| v / max);
        }
        self.normalized = true;
        self
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Binary edge mask together with the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub mask: Array2<bool>,
    pub threshold_used: f64,
}

impl EdgeMap {
    pub fn new(mask: Array2<bool>, threshold_used: f64) -> Self {
        Self {
            mask,
            threshold_used,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Sobel responses `(gx, gy)` with replicated borders.
pub fn sobel_gradients<T: Scalar>(img: &Image<T>) -> Result<(Array2<T>, Array2<T>)> {
    let (rows, cols) = img.dim();
    if rows < 3 || cols < 3 {
        return Err(Error::Config(format!(
            "Sobel needs at least 3x3 pixels, image is {rows}x{cols}"
        )));
    }
    let clamp = |i: isize, len: usize| i.clamp(0, len as isize - 1) as usize;
    let mut gx = Array2::zeros((rows, cols));
    let mut gy = Array2::zeros((rows, cols));
    Zip::indexed(&mut gx)
        .and(&mut gy)
        .for_each(|(m, n), gx, gy| {
            let mut sx = T::zero();
            let mut sy = T::zero();
            for (i, krow) in SOBEL_X.iter().enumerate() {
                for (j, &kx) in krow.iter().enumerate() {
                    let v = img[[
                        clamp(m as isize + i as isize - 1, rows),
                        clamp(n as isize + j as isize - 1, cols),
                    ]];
                    if kx != 0 {
                        sx = sx + T::of(kx as f64) * v;
                    }
                    // vertical kernel is the transpose
                    let ky = SOBEL_X[j][i];
                    if ky != 0 {
                        sy = sy + T::of(ky as f64) * v;
                    }
                }
            }
            *gx = sx;
            *gy = sy;
        });
    Ok((gx, gy))
}

/// Unnormalized gradient magnitude `sqrt(gx^2 + gy^2)`.
pub fn sobel_magnitude_raw<T: Scalar>(img: &Image<T>) -> Result<Array2<T>> {
    let (gx, gy) = sobel_gradients(img)?;
    Ok(Zip::from(&gx).and(&gy).map_collect(|&a, &b| a.hypot(b)))
}

/// Sobel gradient magnitude normalized to a maximum of one.
pub fn sobel_magnitude<T: Scalar>(img: &Image<T>) -> Result<GradMap<T>> {
    Ok(GradMap::raw(sobel_magnitude_raw(img)?).normalize())
}

/// `mask = values >= t`.
pub fn threshold_map<T: Scalar>(g: &GradMap<T>, t: f64) -> Result<EdgeMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config(format!(
            "threshold must lie in [0, 1], got {t}"
        )));
    }
    if !g.normalized {
        return Err(Error::Config(
            "thresholding requires a normalized gradient map".into(),
        ));
    }
    let tt = T::of(t);
    Ok(EdgeMap::new(g.values.mapv(|v| v >= tt), t))
}

/// Gradient map of the synthesized image `P x`.
pub fn synthesis_gradient<T: Scalar>(
    xhat: &CoefficientField<T>,
    op: &SynthesisOperator<T>,
) -> Result<GradMap<T>> {
    sobel_magnitude(&op.apply(xhat)?)
}

/// Edges of the synthesized (denoised) image.
pub fn edges_from_synthesis<T: Scalar>(
    xhat: &CoefficientField<T>,
    op: &SynthesisOperator<T>,
    t: f64,
) -> Result<EdgeMap> {
    threshold_map(&synthesis_gradient(xhat, op)?, t)
}

/// Pixelwise Euclidean norm, across all parameter maps, of each map's Sobel magnitude,
/// normalized to a maximum of one.
pub fn parameter_map_gradient<T: Scalar>(xhat: &CoefficientField<T>) -> Result<GradMap<T>> {
    let mut acc = Array2::<T>::zeros(xhat.dim());
    for map in xhat.maps().axis_iter(Axis(0)) {
        let mag = sobel_magnitude_raw(&map.to_owned())?;
        Zip::from(&mut acc)
            .and(&mag)
            .for_each(|a, &g| *a = *a + g * g);
    }
    acc.mapv_inplace(|v| v.sqrt());
    Ok(GradMap::raw(acc).normalize())
}

pub fn edges_from_parameter_maps<T: Scalar>(xhat: &CoefficientField<T>, t: f64) -> Result<EdgeMap> {
    threshold_map(&parameter_map_gradient(xhat)?, t)
}
