//! Seeded noise injection and edge-map scoring.
//!
//! Noise comes from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`, turned into
//! uniforms with 53 random bits each and into normals with the Box-Muller transform.
//! Transcendentals go through `libm`, so a given seed produces the same image on every
//! platform.

use ndarray::{Array2, Zip};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::edges::{threshold_map, EdgeMap, GradMap};
use crate::error::{Error, Result};
use crate::model::Image;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation in intensity units.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise sigma must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }
}

/// Standard normal samples from the seeded generator.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

/// `img + sigma * g` with `g` i.i.d. standard normal, drawn in row-major order.
/// Values are not clipped.
pub fn add_gaussian_noise<T: Scalar>(img: &Image<T>, spec: &NoiseSpec) -> Image<T> {
    if spec.sigma == 0.0 {
        return img.clone();
    }
    let mut stream = GaussianStream::new(spec.seed);
    img.mapv(|v| T::of(v.to_f64_lossy() + spec.sigma * stream.next_normal()))
}

/// Precision/recall/F1 of a predicted edge map under a pixel tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tolerance_px: usize,
}

impl EdgeScore {
    fn from_pr(precision: f64, recall: f64, tolerance_px: usize) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            tolerance_px,
        }
    }
}

/// Marks every pixel within Chebyshev distance `radius` of a set pixel.
pub fn dilate(mask: &Array2<bool>, radius: usize) -> Array2<bool> {
    if radius == 0 {
        return mask.clone();
    }
    let (rows, cols) = mask.dim();
    let mut horiz = Array2::from_elem((rows, cols), false);
    for m in 0..rows {
        for n in 0..cols {
            let lo = n.saturating_sub(radius);
            let hi = (n + radius).min(cols - 1);
            horiz[[m, n]] = (lo..=hi).any(|j| mask[[m, j]]);
        }
    }
    let mut out = Array2::from_elem((rows, cols), false);
    for m in 0..rows {
        let lo = m.saturating_sub(radius);
        let hi = (m + radius).min(rows - 1);
        for n in 0..cols {
            out[[m, n]] = (lo..=hi).any(|i| horiz[[i, n]]);
        }
    }
    out
}

fn matched(subject: &Array2<bool>, reference_dilated: &Array2<bool>) -> (usize, usize) {
    Zip::from(subject)
        .and(reference_dilated)
        .fold((0, 0), |(hit, total), &s, &r| {
            if s {
                (hit + usize::from(r), total + 1)
            } else {
                (hit, total)
            }
        })
}

/// A predicted pixel counts for precision if a truth pixel lies within `tolerance_px`
/// (Chebyshev); a truth pixel counts for recall if a predicted pixel does.
///
/// An empty prediction has precision 0 and an empty truth recall 0, except that two
/// empty maps agree perfectly.
pub fn score_edges(pred: &EdgeMap, truth: &EdgeMap, tolerance_px: usize) -> Result<EdgeScore> {
    if pred.dim() != truth.dim() {
        return Err(Error::shape(truth.dim(), pred.dim()));
    }
    Ok(score_masks(
        &pred.mask,
        &truth.mask,
        &dilate(&truth.mask, tolerance_px),
        tolerance_px,
    ))
}

fn score_masks(
    pred: &Array2<bool>,
    truth: &Array2<bool>,
    truth_dilated: &Array2<bool>,
    tolerance_px: usize,
) -> EdgeScore {
    let (tp_pred, n_pred) = matched(pred, truth_dilated);
    let (tp_truth, n_truth) = matched(truth, &dilate(pred, tolerance_px));
    if n_pred == 0 && n_truth == 0 {
        return EdgeScore::from_pr(1.0, 1.0, tolerance_px);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    EdgeScore::from_pr(
        ratio(tp_pred, n_pred),
        ratio(tp_truth, n_truth),
        tolerance_px,
    )
}

/// Scores of one gradient map over a grid of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<(f64, EdgeScore)>,
    /// Index of the highest F1; the lowest threshold wins ties.
    pub best: usize,
}

impl Sweep {
    pub fn best_point(&self) -> (f64, EdgeScore) {
        self.points[self.best]
    }
}

pub fn sweep_thresholds<T: Scalar>(
    g: &GradMap<T>,
    truth: &EdgeMap,
    grid: &[f64],
    tolerance_px: usize,
) -> Result<Sweep> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let truth_dilated = dilate(&truth.mask, tolerance_px);
    let mut points: Vec<(f64, EdgeScore)> = Vec::with_capacity(grid.len());
    let mut best = 0;
    for &t in grid {
        let pred = threshold_map(g, t)?;
        if pred.dim() != truth.dim() {
            return Err(Error::shape(truth.dim(), pred.dim()));
        }
        let score = score_masks(&pred.mask, &truth.mask, &truth_dilated, tolerance_px);
        if points.is_empty() || score.f1 > points[best].1.f1 {
            best = points.len();
        }
        points.push((t, score));
    }
    Ok(Sweep { points, best })
}

/// `start, start + step, ...` up to and including `end` (within rounding).
pub fn threshold_grid(start: f64, step: f64, end: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(end >= start) || !start.is_finite() || !end.is_finite() {
        return Err(Error::Config(format!("invalid grid {start}:{step}:{end}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = start + step * i as f64;
            // snap to the decimal grid so thresholds print cleanly
            (v * 1e12).round() / 1e12
        })
        .collect())
}
