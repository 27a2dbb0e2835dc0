//! Reference implementations for the polyedge test suites.
//!
//! Everything here works on plain `f64` vectors and explicitly assembled matrices, using
//! the same vectorization convention as the library (column-major per map, maps
//! concatenated in group order) but none of its code. The horizontal difference
//! operator is assembled literally as "transpose-vectorize, then columnwise difference",
//! so its outputs are ordered row by row.

use nalgebra::{DMatrix, DVector};

/// `(n-1) x n` forward difference matrix.
pub fn difference_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d[(i, i)] = -1.0;
        d[(i, i + 1)] = 1.0;
    }
    d
}

/// Permutation taking `vec(X)` to `vec(X^T)` for an `m x n` matrix `X`.
pub fn transpose_permutation(m: usize, n: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(m * n, m * n);
    for r in 0..m {
        for c in 0..n {
            // X[r, c] sits at c*m + r in vec(X) and at r*n + c in vec(X^T)
            t[(r * n + c, c * m + r)] = 1.0;
        }
    }
    t
}

fn block_diag(block: &DMatrix<f64>, copies: usize) -> DMatrix<f64> {
    let (br, bc) = block.shape();
    let mut out = DMatrix::zeros(br * copies, bc * copies);
    for i in 0..copies {
        out.view_mut((i * br, i * bc), (br, bc)).copy_from(block);
    }
    out
}

/// Stacked vertical differences over `groups` maps of size `m x n`.
pub fn dense_vertical(groups: usize, m: usize, n: usize) -> DMatrix<f64> {
    let per_map = identity_kron(n, &difference_matrix(m));
    block_diag(&per_map, groups)
}

/// Stacked horizontal differences `L_h reshape(.)`; each block's output is the
/// row-major vectorization of the `m x (n-1)` difference map.
pub fn dense_horizontal(groups: usize, m: usize, n: usize) -> DMatrix<f64> {
    let per_map = identity_kron(m, &difference_matrix(n)) * transpose_permutation(m, n);
    block_diag(&per_map, groups)
}

fn identity_kron(copies: usize, block: &DMatrix<f64>) -> DMatrix<f64> {
    block_diag(block, copies)
}

/// `P = [diag(p_0) | ... | diag(p_G)]` from column-major basis images.
pub fn dense_synthesis(basis_images: &[Vec<f64>]) -> DMatrix<f64> {
    let len = basis_images[0].len();
    let mut p = DMatrix::zeros(len, len * basis_images.len());
    for (g, img) in basis_images.iter().enumerate() {
        for (i, &v) in img.iter().enumerate() {
            p[(i, g * len + i)] = v;
        }
    }
    p
}

/// Sum of group norms where group `j` collects entry `j` of each of `groups`
/// equally long consecutive blocks (the "rows of the stacked matrix").
pub fn l21_rows(v: &[f64], groups: usize) -> f64 {
    let rows = v.len() / groups;
    let stacked = DMatrix::from_column_slice(rows, groups, v);
    stacked.row_iter().map(|r| r.norm()).sum()
}

/// Groupwise radial projection onto the ball of radius `radius`.
pub fn project_groups(v: &[f64], groups: usize, radius: f64) -> Vec<f64> {
    let rows = v.len() / groups;
    let mut out = v.to_vec();
    for r in 0..rows {
        let nrm = (0..groups)
            .map(|g| v[g * rows + r].powi(2))
            .sum::<f64>()
            .sqrt();
        if nrm > radius {
            for g in 0..groups {
                out[g * rows + r] = v[g * rows + r] * radius / nrm;
            }
        }
    }
    out
}

/// Minimizer of `0.5 ||z - v||^2 + tau ||z||_2` over `z` in the plane, by nested grid
/// search: an `n x n` grid around the current best point, shrunk each round.
pub fn grid_search_group_prox(v: [f64; 2], tau: f64) -> [f64; 2] {
    let f = |z: [f64; 2]| {
        0.5 * ((z[0] - v[0]).powi(2) + (z[1] - v[1]).powi(2)) + tau * z[0].hypot(z[1])
    };
    let mut center = [0.0, 0.0];
    let mut half = v[0].abs().max(v[1].abs()) + 1.0;
    let n = 41;
    for _ in 0..40 {
        let mut best = (f(center), center);
        for i in 0..n {
            for j in 0..n {
                let z = [
                    center[0] - half + 2.0 * half * i as f64 / (n - 1) as f64,
                    center[1] - half + 2.0 * half * j as f64 / (n - 1) as f64,
                ];
                let val = f(z);
                if val < best.0 {
                    best = (val, z);
                }
            }
        }
        center = best.1;
        half *= 0.25;
    }
    center
}

/// Minimizer of a convex function by cyclic exact line searches along the coordinate
/// axes, a fixed set of pseudo-random directions and the pattern direction of the last
/// sweep, starting from `x0`.
pub fn direct_minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], sweeps: usize) -> Vec<f64> {
    let dim = x0.len();
    let mut dirs: Vec<Vec<f64>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    for _ in 0..dim {
        let d: Vec<f64> = (0..dim)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        dirs.push(d.iter().map(|v| v / n).collect());
    }
    let mut x = x0.to_vec();
    for _ in 0..sweeps {
        let start = x.clone();
        for d in &dirs {
            x = line_minimize(&f, &x, d);
        }
        let pattern: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let n = pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-15 {
            break;
        }
        let d: Vec<f64> = pattern.iter().map(|v| v / n).collect();
        x = line_minimize(&f, &x, &d);
    }
    x
}

fn line_minimize(f: &impl Fn(&[f64]) -> f64, x: &[f64], d: &[f64]) -> Vec<f64> {
    let along = |t: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + t * b).collect() };
    let g = |t: f64| f(&along(t));
    let base = g(0.0);
    let mut h = 1.0;
    while g(h) < base || g(-h) < base {
        h *= 2.0;
    }
    // golden-section search on [-h, h]
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-h, h);
    let mut c = b - phi * (b - a);
    let mut e = a + phi * (b - a);
    let (mut fc, mut fe) = (g(c), g(e));
    for _ in 0..120 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + phi * (b - a);
            fe = g(e);
        }
    }
    let t = 0.5 * (a + b);
    if g(t) < base {
        along(t)
    } else {
        x.to_vec()
    }
}

/// Euclidean projection of `z` onto `{w : ||w - c|| <= delta}` through the Lagrangian:
/// `w(mu) = (z + mu c) / (1 + mu)` with `mu >= 0` found by bisection on the
/// constraint.
pub fn ball_projection_by_dual(z: &[f64], c: &[f64], delta: f64) -> Vec<f64> {
    let w = |mu: f64| -> Vec<f64> {
        z.iter()
            .zip(c)
            .map(|(&a, &b)| (a + mu * b) / (1.0 + mu))
            .collect()
    };
    let dist = |w: &[f64]| -> f64 {
        w.iter()
            .zip(c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if dist(z) <= delta {
        return z.to_vec();
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while dist(&w(hi)) > delta {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist(&w(mid)) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    w(hi)
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power iteration.
pub fn power_iteration(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    iters: usize,
) -> f64 {
    // deterministic start with energy in every component
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        lambda = v.dot(&w);
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        v = w / nrm;
    }
    lambda
}

/// Sparse row-compressed copy of a dense matrix, for fast repeated products.
#[derive(Debug, Clone)]
pub struct Csr {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = m[(r, c)];
                if v != 0.0 {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(vals.len());
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|i| self.vals[i] * x[self.col_idx[i]])
                    .sum()
            })
            .collect()
    }

    pub fn mul_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate().take(self.rows) {
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[i]] += self.vals[i] * yr;
            }
        }
        out
    }
}

/// The constrained group-sparse problem in assembled form.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub groups: usize,
    pub lv: DMatrix<f64>,
    pub lh: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
}

impl DenseProblem {
    /// `basis_images` column-major, `y` column-major.
    pub fn new(
        m: usize,
        n: usize,
        basis_images: &[Vec<f64>],
        y: Vec<f64>,
        lambda: f64,
        delta: f64,
    ) -> Self {
        let groups = basis_images.len();
        Self {
            groups,
            lv: dense_vertical(groups, m, n),
            lh: dense_horizontal(groups, m, n),
            p: dense_synthesis(basis_images),
            y,
            lambda,
            delta,
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        l21_rows((&self.lv * &xv).as_slice(), self.groups)
            + self.lambda * l21_rows((&self.lh * &xv).as_slice(), self.groups)
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        let px = &self.p * DVector::from_column_slice(x);
        px.iter()
            .zip(&self.y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// One literal pass of the relaxed primal-dual update, with everything assembled.
    pub fn condat_step(
        &self,
        x: &[f64],
        u: [&[f64]; 3],
        xi: f64,
        sigma: f64,
        rho: f64,
    ) -> (Vec<f64>, [Vec<f64>; 3]) {
        let x = DVector::from_column_slice(x);
        let u1 = DVector::from_column_slice(u[0]);
        let u2 = DVector::from_column_slice(u[1]);
        let u3 = DVector::from_column_slice(u[2]);
        let x_bar = &x
            - xi * (self.lv.transpose() * &u1
                + self.lh.transpose() * &u2
                + self.p.transpose() * &u3);
        let x_new = rho * &x_bar + (1.0 - rho) * &x;
        let w = 2.0 * &x_bar - &x;

        let p1 = &u1 + sigma * (&self.lv * &w);
        let u1_bar = DVector::from_vec(project_groups(p1.as_slice(), self.groups, 1.0));
        let u1_new = rho * u1_bar + (1.0 - rho) * &u1;

        let p2 = &u2 + sigma * (&self.lh * &w);
        let u2_bar = DVector::from_vec(project_groups(p2.as_slice(), self.groups, self.lambda));
        let u2_new = rho * u2_bar + (1.0 - rho) * &u2;

        let p3 = &u3 + sigma * (&self.p * &w);
        let scaled: Vec<f64> = p3.iter().map(|v| v / sigma).collect();
        let proj = DVector::from_vec(ball_projection_by_dual(&scaled, &self.y, self.delta));
        let u3_bar = &p3 - sigma * proj;
        let u3_new = rho * u3_bar + (1.0 - rho) * &u3;

        (
            x_new.as_slice().to_vec(),
            [
                u1_new.as_slice().to_vec(),
                u2_new.as_slice().to_vec(),
                u3_new.as_slice().to_vec(),
            ],
        )
    }

    /// Projected subgradient method. Returns the best feasible point and its objective.
    ///
    /// Runs `stages` restarts from the incumbent, each of `iters / stages` normalized
    /// subgradient steps with length `scale / sqrt(j + 1)`, `scale` shrinking by
    /// `shrink` per stage. The feasible set `{x : ||y - P x|| <= delta}` is projected
    /// onto exactly, using that `P P^T` is diagonal.
    pub fn projected_subgradient(
        &self,
        x0: &[f64],
        iters: usize,
        stages: usize,
        scale: f64,
        shrink: f64,
    ) -> (Vec<f64>, f64) {
        let lv = Csr::from_dense(&self.lv);
        let lh = Csr::from_dense(&self.lh);
        let p = Csr::from_dense(&self.p);
        let d: Vec<f64> = self.p.row_iter().map(|r| r.norm_squared()).collect();

        let project = |x: &[f64]| -> Vec<f64> {
            let r: Vec<f64> = p.mul(x).iter().zip(&self.y).map(|(a, b)| a - b).collect();
            let norm = |mu: f64| {
                r.iter()
                    .zip(&d)
                    .map(|(ri, di)| (ri / (1.0 + mu * di)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            if norm(0.0) <= self.delta {
                return x.to_vec();
            }
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            while norm(hi) > self.delta {
                hi *= 2.0;
            }
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if norm(mid) > self.delta {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // z = x - mu P^T r_z with r_z = r / (1 + mu d)
            let rz: Vec<f64> = r
                .iter()
                .zip(&d)
                .map(|(ri, di)| hi * ri / (1.0 + hi * di))
                .collect();
            let corr = p.mul_transpose(&rz);
            x.iter().zip(&corr).map(|(a, b)| a - b).collect()
        };

        let groups = self.groups;
        let group_sub = |v: Vec<f64>, weight: f64| -> Vec<f64> {
            let rows = v.len() / groups;
            let mut s = vec![0.0; v.len()];
            for r in 0..rows {
                let nrm = (0..groups)
                    .map(|g| v[g * rows + r].powi(2))
                    .sum::<f64>()
                    .sqrt();
                if nrm > 0.0 {
                    for g in 0..groups {
                        s[g * rows + r] = weight * v[g * rows + r] / nrm;
                    }
                }
            }
            s
        };
        let objective =
            |x: &[f64]| l21_rows(&lv.mul(x), groups) + self.lambda * l21_rows(&lh.mul(x), groups);

        let mut best_x = project(x0);
        let mut best_f = objective(&best_x);
        let per_stage = iters / stages.max(1);
        let mut step_scale = scale;
        for _ in 0..stages.max(1) {
            let mut x = best_x.clone();
            for j in 0..per_stage {
                let g1 = lv.mul_transpose(&group_sub(lv.mul(&x), 1.0));
                let g2 = lh.mul_transpose(&group_sub(lh.mul(&x), self.lambda));
                let g: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a + b).collect();
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if gn == 0.0 {
                    break;
                }
                let alpha = step_scale / ((j + 1) as f64).sqrt() / gn;
                let stepped: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
                x = project(&stepped);
                let f = objective(&x);
                if f < best_f {
                    best_f = f;
                    best_x = x.clone();
                }
            }
            step_scale *= shrink;
        }
        (best_x, best_f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_permutation_works() {
        // X = [[1, 2, 3], [4, 5, 6]], vec(X) = [1, 4, 2, 5, 3, 6]
        let t = transpose_permutation(2, 3);
        let v = DVector::from_vec(vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!((t * v).as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn grid_prox_matches_closed_form_case() {
        let z = grid_search_group_prox([6.0, 8.0], 5.0);
        assert!((z[0] - 3.0).abs() < 1e-7 && (z[1] - 4.0).abs() < 1e-7);
    }

    #[test]
    fn direct_minimize_quadratic() {
        let f = |z: &[f64]| (z[0] - 1.0).powi(2) + 3.0 * (z[1] + 2.0).powi(2) + (z[0] - z[1]).abs();
        let z = direct_minimize(f, &[0.0, 0.0], 60);
        // optimum where the kink is inactive: z0 > z1, 2(z0-1) + 1 = 0, 6(z1+2) - 1 = 0
        assert!((z[0] - 0.5).abs() < 1e-7 && (z[1] + 2.0 - 1.0 / 6.0).abs() < 1e-7);
    }

    #[test]
    fn dual_projection() {
        let w = ball_projection_by_dual(&[2.0, 0.0], &[0.0, 0.0], 1.0);
        assert!((w[0] - 1.0).abs() < 1e-12 && w[1].abs() < 1e-12);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let d = DVector::from_vec(vec![1.0, 5.0, 2.0]);
        let l = power_iteration(|v| v.component_mul(&d), 3, 200);
        assert!((l - 5.0).abs() < 1e-9);
    }
}
