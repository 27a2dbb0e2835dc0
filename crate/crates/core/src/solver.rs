//! Primal-dual (Condat) iteration for the constrained group-sparse denoising problem
//!
//! ```text
//! minimize ||L_v x||_21 + lambda ||L_h reshape(x)||_21   s.t.  ||y - P x||_2 <= delta
//! ```
//!
//! Each penalty and the data constraint get their own dual variable; the constraint
//! enters through its indicator function, whose proximal map is the ball projection.

use std::io::Write;

use ndarray::{Array3, Zip};

use crate::error::{Error, Result};
use crate::model::{group_size, CoefficientField, Image, SynthesisOperator};
use crate::prox::{self, DiffField, Direction};
use crate::scalar::Scalar;

/// The problem data: observation, model operator and the two weights.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    y: Image<T>,
    op: SynthesisOperator<T>,
    lambda: T,
    delta: T,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(y: Image<T>, op: SynthesisOperator<T>, lambda: T, delta: T) -> Result<Self> {
        if y.dim() != op.dim() {
            return Err(Error::shape(op.dim(), y.dim()));
        }
        let (m, n) = y.dim();
        if m < 2 || n < 2 {
            return Err(Error::Config(format!(
                "image must be at least 2x2, got {m}x{n}"
            )));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(delta >= T::zero()) || !delta.is_finite() {
            return Err(Error::Config(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "observation contains non-finite values".into(),
            ));
        }
        Ok(Self {
            y,
            op,
            lambda,
            delta,
        })
    }

    pub fn y(&self) -> &Image<T> {
        &self.y
    }

    pub fn op(&self) -> &SynthesisOperator<T> {
        &self.op
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `||L_v x||_21 + lambda ||L_h x||_21`.
    pub fn objective(&self, x: &CoefficientField<T>) -> T {
        objective_raw(x.maps(), self.lambda)
    }

    /// `||y - P x||_2`.
    pub fn residual_norm(&self, x: &CoefficientField<T>) -> T {
        residual_norm_raw(&self.op, &self.y, x.maps())
    }

    /// `max(0, ||y - P x||_2 - delta)`.
    pub fn feasibility_gap(&self, x: &CoefficientField<T>) -> T {
        (self.residual_norm(x) - self.delta).max(T::zero())
    }
}

fn objective_raw<T: Scalar>(x: &Array3<T>, lambda: T) -> T {
    prox::norm_l21_raw(&prox::forward_diff(x, Direction::Vertical))
        + lambda * prox::norm_l21_raw(&prox::forward_diff(x, Direction::Horizontal))
}

fn residual_norm_raw<T: Scalar>(op: &SynthesisOperator<T>, y: &Image<T>, x: &Array3<T>) -> T {
    let px = op.apply_unchecked(x);
    Zip::from(y)
        .and(&px)
        .fold(T::zero(), |acc, &a, &b| acc + (a - b) * (a - b))
        .sqrt()
}

/// Step sizes, relaxation and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Primal step.
    pub xi: T,
    /// Dual step.
    pub sigma: T,
    /// Relaxation, in `(0, 2)`.
    pub rho: T,
    pub max_iters: usize,
    /// Stop once `||x_{i+1} - x_i|| / ||x_i||` falls to this value; `0` disables.
    pub fixed_point_tol: T,
}

/// `max diag(P P^T) + 8 (K+1)^2`, the bound on the squared norm of the stacked operator.
pub fn step_bound<T: Scalar>(op: &SynthesisOperator<T>) -> T {
    op.max_diag_ppt() + T::of(8.0 * group_size(op.degree()) as f64)
}

impl<T: Scalar> SolverConfig<T> {
    /// Equal primal and dual steps saturating `xi * sigma * bound <= 1`.
    pub fn default_for(op: &SynthesisOperator<T>) -> Self {
        let bound = step_bound(op);
        let mut step = bound.sqrt().recip();
        // rounding can leave the product a few ulps above one
        while step * step * bound > T::one() {
            step = step * (T::one() - T::epsilon());
        }
        Self {
            xi: step,
            sigma: step,
            rho: T::one(),
            max_iters: 500,
            fixed_point_tol: T::zero(),
        }
    }

    /// Rebalances the steps to `xi / sigma = ratio`, keeping the product `xi * sigma`.
    /// Useful when the primal variables live on a much larger scale than the duals.
    pub fn with_step_ratio(mut self, ratio: T) -> Self {
        let product = self.xi * self.sigma;
        self.xi = (product * ratio).sqrt();
        self.sigma = (product / ratio).sqrt();
        while self.xi * self.sigma > product {
            self.sigma = self.sigma * (T::one() - T::epsilon());
        }
        self
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self, op: &SynthesisOperator<T>) -> Result<()> {
        if !(self.xi > T::zero() && self.sigma > T::zero()) {
            return Err(Error::Config(format!(
                "steps must be positive, got xi={} sigma={}",
                self.xi, self.sigma
            )));
        }
        if !(self.rho > T::zero() && self.rho < T::of(2.0)) {
            return Err(Error::Config(format!(
                "rho must lie in (0, 2), got {}",
                self.rho
            )));
        }
        if !(self.fixed_point_tol >= T::zero()) {
            return Err(Error::Config(
                "fixed-point tolerance must be nonnegative".into(),
            ));
        }
        let product = self.xi * self.sigma * step_bound(op);
        if !(product <= T::one()) {
            return Err(Error::Config(format!(
                "step sizes violate the convergence bound: xi*sigma*bound = {product} > 1"
            )));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics, evaluated at the new primal iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    pub objective: T,
    pub feasibility_gap: T,
    /// `||x_{i+1} - x_i||_2`.
    pub fixed_point_residual: T,
}

#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub x: CoefficientField<T>,
    pub u1: DiffField<T>,
    pub u2: DiffField<T>,
    pub u3: Image<T>,
    pub iter: usize,
    pub history: Vec<IterationRecord<T>>,
    /// Reused buffer for the extrapolated point `2 x_bar - x`.
    scratch: Vec<T>,
}

impl<T: Scalar> SolverState<T> {
    /// Zero duals and the given (or zero) primal.
    pub fn new(spec: &ProblemSpec<T>, x0: Option<CoefficientField<T>>) -> Result<Self> {
        let degree = spec.op.degree();
        let (m, n) = spec.op.dim();
        let x = match x0 {
            Some(x) => {
                if x.degree() != degree || x.dim() != (m, n) {
                    return Err(Error::shape((degree, m, n), (x.degree(), x.dim())));
                }
                x
            }
            None => CoefficientField::zeros(degree, m, n),
        };
        Ok(Self {
            x,
            u1: DiffField::zeros(Direction::Vertical, degree, m, n),
            u2: DiffField::zeros(Direction::Horizontal, degree, m, n),
            u3: Image::zeros((m, n)),
            iter: 0,
            history: Vec::new(),
            scratch: Vec::new(),
        })
    }

    fn check(&self, spec: &ProblemSpec<T>) -> Result<()> {
        let degree = spec.op.degree();
        let (m, n) = spec.op.dim();
        let g = group_size(degree);
        if self.x.maps().dim() != (g, m, n)
            || self.u1.maps().dim() != (g, m - 1, n)
            || self.u1.direction() != Direction::Vertical
            || self.u2.maps().dim() != (g, m, n - 1)
            || self.u2.direction() != Direction::Horizontal
            || self.u3.dim() != (m, n)
        {
            return Err(Error::shape(
                "state matching the problem",
                "inconsistent state",
            ));
        }
        Ok(())
    }

    /// Writes `iter,objective,feasibility_gap,fixed_point_residual` rows.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,objective,feasibility_gap,fixed_point_residual")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{:.9e},{:.9e},{:.9e}",
                r.iter,
                r.objective.to_f64_lossy(),
                r.feasibility_gap.to_f64_lossy(),
                r.fixed_point_residual.to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

fn all_finite<'a, T: Scalar>(mut it: impl Iterator<Item = &'a T>) -> bool {
    it.all(|v| v.is_finite())
}

fn standardize<T: Scalar, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) {
    if !a.is_standard_layout() {
        *a = a.as_standard_layout().into_owned();
    }
}

/// Objective `||L_v x||_21 + lambda ||L_h x||_21` and residual norm `||y - P x||`.
fn diagnostics<T: Scalar>(
    x: &[T],
    basis: &[T],
    y: &[T],
    (groups, rows, cols): (usize, usize, usize),
    lambda: T,
    vert: &mut [T],
    horiz: &mut [T],
) -> (T, T) {
    let plane = rows * cols;
    vert.iter_mut().for_each(|v| *v = T::zero());
    horiz.iter_mut().for_each(|v| *v = T::zero());
    let mut px = vec![T::zero(); plane];
    for g in 0..groups {
        let xg = &x[g * plane..(g + 1) * plane];
        let bg = &basis[g * plane..(g + 1) * plane];
        for (i, s) in vert.iter_mut().enumerate() {
            let d = xg[i + cols] - xg[i];
            *s = *s + d * d;
        }
        for m in 0..rows {
            let row = &xg[m * cols..(m + 1) * cols];
            let acc = &mut horiz[m * (cols - 1)..(m + 1) * (cols - 1)];
            for (n, s) in acc.iter_mut().enumerate() {
                let d = row[n + 1] - row[n];
                *s = *s + d * d;
            }
        }
        for ((p, &b), &v) in px.iter_mut().zip(bg).zip(xg) {
            *p = *p + b * v;
        }
    }
    let tv = vert.iter().map(|v| v.sqrt()).sum::<T>();
    let th = horiz.iter().map(|v| v.sqrt()).sum::<T>();
    let res = y
        .iter()
        .zip(&px)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        .sqrt();
    (tv + lambda * th, res)
}

/// Dual update `u <- relax(p - soft(p, radius))` with `p = u + sigma D w`, where `D` is
/// the forward difference with the given stride, producing a `drows x dcols` lattice.
#[allow(clippy::too_many_arguments)]
fn dual_update<T: Scalar>(
    u: &mut [T],
    w: &[T],
    norms: &mut [T],
    (groups, rows, cols): (usize, usize, usize),
    stride: usize,
    (drows, dcols): (usize, usize),
    radius: T,
    sigma: T,
    rho: T,
) {
    let plane = rows * cols;
    let dplane = drows * dcols;
    let old = (rho != T::one()).then(|| u.to_vec());
    norms.iter_mut().for_each(|v| *v = T::zero());
    for g in 0..groups {
        let wg = &w[g * plane..(g + 1) * plane];
        let ug = &mut u[g * dplane..(g + 1) * dplane];
        for m in 0..drows {
            let src = &wg[m * cols..];
            let row = &mut ug[m * dcols..(m + 1) * dcols];
            let nrow = &mut norms[m * dcols..(m + 1) * dcols];
            for n in 0..dcols {
                let v = row[n] + sigma * (src[n + stride] - src[n]);
                row[n] = v;
                nrow[n] = nrow[n] + v * v;
            }
        }
    }
    for v in norms.iter_mut() {
        let nrm = v.sqrt();
        *v = if nrm > radius { radius / nrm } else { T::one() };
    }
    let keep = T::one() - rho;
    for g in 0..groups {
        let ug = &mut u[g * dplane..(g + 1) * dplane];
        for (uv, &scale) in ug.iter_mut().zip(norms.iter()) {
            *uv = *uv * scale;
        }
        if let Some(old) = &old {
            for (uv, &ov) in ug.iter_mut().zip(&old[g * dplane..(g + 1) * dplane]) {
                *uv = rho * *uv + keep * ov;
            }
        }
    }
}

/// One pass of the primal-dual update. Returns the advanced state with its history
/// extended by one record.
///
/// ```text
/// x_bar = x - xi (L_v^T u1 + L_h^T u2 + P^T u3)        x+  = rho x_bar + (1-rho) x
/// p1 = u1 + sigma L_v (2 x_bar - x)                    u1+ = relax(p1 - soft(p1, 1))
/// p2 = u2 + sigma L_h (2 x_bar - x)                    u2+ = relax(p2 - soft(p2, lambda))
/// p3 = u3 + sigma P (2 x_bar - x)                      u3+ = relax(p3 - sigma proj(p3 / sigma))
/// ```
pub fn condat_step<T: Scalar>(
    mut state: SolverState<T>,
    spec: &ProblemSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<SolverState<T>> {
    state.check(spec)?;
    standardize(state.x.maps_mut());
    standardize(state.u1.maps_mut());
    standardize(state.u2.maps_mut());
    standardize(&mut state.u3);
    let iter = state.iter;
    let (xi, sigma, rho) = (cfg.xi, cfg.sigma, cfg.rho);
    let keep = T::one() - rho;
    let relaxed = rho != T::one();

    let basis_arr = spec.op.basis().images().as_standard_layout();
    let basis = basis_arr.as_slice().expect("standard layout");
    let y_arr = spec.y.as_standard_layout();
    let y = y_arr.as_slice().expect("standard layout");
    let dims = basis_arr.dim();
    let (groups, rows, cols) = dims;
    let plane = rows * cols;

    let mut w = std::mem::take(&mut state.scratch);
    w.resize(groups * plane, T::zero());

    // primal update; x is overwritten with the relaxed iterate
    let mut step_sq = T::zero();
    {
        let x = state.x.maps_mut().as_slice_mut().expect("standard layout");
        let u1 = state.u1.maps().as_slice().expect("standard layout");
        let u2 = state.u2.maps().as_slice().expect("standard layout");
        let u3 = state.u3.as_slice().expect("standard layout");
        for g in 0..groups {
            for m in 0..rows {
                for n in 0..cols {
                    let at = m * cols + n;
                    let i = g * plane + at;
                    let mut grad = basis[i] * u3[at];
                    // L_v^T: u1 lives on (rows-1) x cols
                    let iv = g * (rows - 1) * cols + m * cols + n;
                    if m > 0 {
                        grad = grad + u1[iv - cols];
                    }
                    if m + 1 < rows {
                        grad = grad - u1[iv];
                    }
                    // L_h^T: u2 lives on rows x (cols-1)
                    let ih = g * rows * (cols - 1) + m * (cols - 1) + n;
                    if n > 0 {
                        grad = grad + u2[ih - 1];
                    }
                    if n + 1 < cols {
                        grad = grad - u2[ih];
                    }
                    let old = x[i];
                    let bar = old - xi * grad;
                    w[i] = bar + bar - old;
                    let new = if relaxed { rho * bar + keep * old } else { bar };
                    step_sq = step_sq + (new - old) * (new - old);
                    x[i] = new;
                }
            }
        }
    }
    if !all_finite(state.x.maps().iter()) {
        return Err(Error::Divergence {
            iter,
            variable: "x",
        });
    }

    let mut norms = vec![T::zero(); plane];

    // vertical penalty dual, radius 1
    {
        let u1 = state.u1.maps_mut().as_slice_mut().expect("standard layout");
        let vplane = (rows - 1) * cols;
        dual_update(
            u1,
            &w,
            &mut norms[..vplane],
            dims,
            cols,
            (rows - 1, cols),
            T::one(),
            sigma,
            rho,
        );
    }
    if !all_finite(state.u1.maps().iter()) {
        return Err(Error::Divergence {
            iter,
            variable: "u1",
        });
    }

    // horizontal penalty dual, radius lambda
    {
        let u2 = state.u2.maps_mut().as_slice_mut().expect("standard layout");
        let hplane = rows * (cols - 1);
        dual_update(
            u2,
            &w,
            &mut norms[..hplane],
            dims,
            1,
            (rows, cols - 1),
            spec.lambda,
            sigma,
            rho,
        );
    }
    if !all_finite(state.u2.maps().iter()) {
        return Err(Error::Divergence {
            iter,
            variable: "u2",
        });
    }

    // data-constraint dual: p3 - sigma proj_B(y, delta)(p3 / sigma)
    {
        let u3 = state.u3.as_slice_mut().expect("standard layout");
        let mut p3 = vec![T::zero(); plane];
        for g in 0..groups {
            let wg = &w[g * plane..(g + 1) * plane];
            let bg = &basis[g * plane..(g + 1) * plane];
            for ((p, &b), &v) in p3.iter_mut().zip(bg).zip(wg) {
                *p = *p + b * v;
            }
        }
        let mut dist_sq = T::zero();
        for ((p, &u), &yv) in p3.iter_mut().zip(u3.iter()).zip(y) {
            *p = u + sigma * *p;
            let d = *p / sigma - yv;
            dist_sq = dist_sq + d * d;
        }
        let dist = dist_sq.sqrt();
        let shrink = if dist > spec.delta {
            spec.delta / dist
        } else {
            T::one()
        };
        for (at, &p) in p3.iter().enumerate() {
            let proj = y[at] + (p / sigma - y[at]) * shrink;
            let bar = p - sigma * proj;
            u3[at] = if relaxed {
                rho * bar + keep * u3[at]
            } else {
                bar
            };
        }
    }
    if !all_finite(state.u3.iter()) {
        return Err(Error::Divergence {
            iter,
            variable: "u3",
        });
    }

    let x = state.x.maps().as_slice().expect("standard layout");
    let mut horiz = vec![T::zero(); rows * (cols - 1)];
    let (objective, residual) = diagnostics(
        x,
        basis,
        y,
        dims,
        spec.lambda,
        &mut norms[..(rows - 1) * cols],
        &mut horiz,
    );
    state.history.push(IterationRecord {
        iter: iter + 1,
        objective,
        feasibility_gap: (residual - spec.delta).max(T::zero()),
        fixed_point_residual: step_sq.sqrt(),
    });
    state.iter = iter + 1;
    state.scratch = w;
    Ok(state)
}

/// Iterates [`condat_step`] from `x0` (zero by default) with zero duals until
/// `max_iters` or the fixed-point tolerance is reached.
pub fn solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    cfg: &SolverConfig<T>,
    x0: Option<CoefficientField<T>>,
) -> Result<(CoefficientField<T>, SolverState<T>)> {
    cfg.validate(&spec.op)?;
    let mut state = SolverState::new(spec, x0)?;
    state.history.reserve(cfg.max_iters);
    for _ in 0..cfg.max_iters {
        let prev_norm = state.x.norm();
        state = condat_step(state, spec, cfg)?;
        if cfg.fixed_point_tol > T::zero() {
            let step = state
                .history
                .last()
                .map_or(T::zero(), |r| r.fixed_point_residual);
            let converged = if prev_norm > T::zero() {
                step / prev_norm <= cfg.fixed_point_tol
            } else {
                step == T::zero()
            };
            if converged {
                break;
            }
        }
    }
    Ok((state.x.clone(), state))
}
