//! Difference operators on parameter maps and the proximal building blocks of the solver.
//!
//! Differences are forward and non-periodic: the vertical operator maps each `M x N`
//! map to `(M-1) x N`, the horizontal one to `M x (N-1)`. The horizontal operator is
//! the columnwise difference applied after transposing every map; since that transpose
//! is a permutation, it is computed directly along the column axis.
//!
//! A *group* is the vector of `(K+1)^2` differenced parameters at one lattice position.

use ndarray::{s, Array2, Array3, ArrayView3, Axis, Zip};

use crate::error::{Error, Result};
use crate::model::{CoefficientField, Image};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Vertical,
    Horizontal,
}

impl Direction {
    fn axis(self) -> Axis {
        match self {
            Direction::Vertical => Axis(1),
            Direction::Horizontal => Axis(2),
        }
    }
}

/// Differenced parameter maps, `(K+1)^2 x rows x cols`, with the lattice shortened by one
/// along `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffField<T> {
    direction: Direction,
    degree: usize,
    maps: Array3<T>,
}

impl<T: Scalar> DiffField<T> {
    pub fn zeros(direction: Direction, degree: usize, rows: usize, cols: usize) -> Self {
        let groups = crate::model::group_size(degree);
        let dim = match direction {
            Direction::Vertical => (groups, rows.saturating_sub(1), cols),
            Direction::Horizontal => (groups, rows, cols.saturating_sub(1)),
        };
        Self {
            direction,
            degree,
            maps: Array3::zeros(dim),
        }
    }

    pub fn from_maps(direction: Direction, degree: usize, maps: Array3<T>) -> Result<Self> {
        let groups = crate::model::group_size(degree);
        if maps.len_of(Axis(0)) != groups {
            return Err(Error::shape(groups, maps.len_of(Axis(0))));
        }
        Ok(Self {
            direction,
            degree,
            maps,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn maps(&self) -> &Array3<T> {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut Array3<T> {
        &mut self.maps
    }

    /// Group lattice dimensions.
    pub fn lattice(&self) -> (usize, usize) {
        let (_, r, c) = self.maps.dim();
        (r, c)
    }

    /// Image dimensions `(M, N)` of the field this was differenced from.
    pub fn source_dim(&self) -> (usize, usize) {
        let (r, c) = self.lattice();
        match self.direction {
            Direction::Vertical => (r + 1, c),
            Direction::Horizontal => (r, c + 1),
        }
    }

    /// Coefficients of the group at lattice position `(m, n)`.
    pub fn group(&self, m: usize, n: usize) -> Vec<T> {
        self.maps.slice(s![.., m, n]).to_vec()
    }

    /// Euclidean norm of every group, laid out on the group lattice.
    pub fn group_norms(&self) -> Array2<T> {
        group_norms(self.maps.view())
    }

    pub fn norm(&self) -> T {
        self.maps.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        Zip::from(&self.maps)
            .and(&other.maps)
            .fold(T::zero(), |acc, &a, &b| acc + a * b)
    }
}

/// Nonnegative threshold for group shrinkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupThreshold<T>(T);

impl<T: Scalar> GroupThreshold<T> {
    pub fn new(tau: T) -> Result<Self> {
        if !(tau >= T::zero()) {
            return Err(Error::Config(format!(
                "threshold must be nonnegative, got {tau}"
            )));
        }
        Ok(Self(tau))
    }

    pub fn tau(self) -> T {
        self.0
    }
}

pub(crate) fn group_norms<T: Scalar>(maps: ArrayView3<'_, T>) -> Array2<T> {
    maps.fold_axis(Axis(0), T::zero(), |&acc, &v| acc + v * v)
        .mapv_into(|s| s.sqrt())
}

pub(crate) fn forward_diff<T: Scalar>(maps: &Array3<T>, direction: Direction) -> Array3<T> {
    let ax = direction.axis();
    let len = maps.len_of(ax);
    let hi = maps.slice_axis(ax, (1..len).into());
    let lo = maps.slice_axis(ax, (0..len - 1).into());
    &hi - &lo
}

/// Adds the adjoint of [`forward_diff`] applied to `d` into `out`.
pub(crate) fn forward_diff_adjoint_add<T: Scalar>(
    d: &Array3<T>,
    direction: Direction,
    out: &mut Array3<T>,
) {
    let ax = direction.axis();
    let len = out.len_of(ax);
    Zip::from(out.slice_axis_mut(ax, (0..len - 1).into()))
        .and(d)
        .for_each(|o, &v| *o = *o - v);
    Zip::from(out.slice_axis_mut(ax, (1..len).into()))
        .and(d)
        .for_each(|o, &v| *o = *o + v);
}

fn differentiate<T: Scalar>(x: &CoefficientField<T>, direction: Direction) -> Result<DiffField<T>> {
    let (m, n) = x.dim();
    let len = match direction {
        Direction::Vertical => m,
        Direction::Horizontal => n,
    };
    if len < 2 {
        return Err(Error::Config(format!(
            "{direction:?} differences need at least 2 samples, image is {m}x{n}"
        )));
    }
    Ok(DiffField {
        direction,
        degree: x.degree(),
        maps: forward_diff(x.maps(), direction),
    })
}

/// `L_v x`: per map, `out[m, n] = x[m+1, n] - x[m, n]`.
pub fn diff_vertical<T: Scalar>(x: &CoefficientField<T>) -> Result<DiffField<T>> {
    differentiate(x, Direction::Vertical)
}

/// `L_h reshape(x)`: per map, `out[m, n] = x[m, n+1] - x[m, n]`.
pub fn diff_horizontal<T: Scalar>(x: &CoefficientField<T>) -> Result<DiffField<T>> {
    differentiate(x, Direction::Horizontal)
}

fn diff_adjoint<T: Scalar>(d: &DiffField<T>, direction: Direction) -> Result<CoefficientField<T>> {
    if d.direction != direction {
        return Err(Error::shape(direction, d.direction));
    }
    let (m, n) = d.source_dim();
    let mut out = CoefficientField::zeros(d.degree, m, n);
    forward_diff_adjoint_add(&d.maps, direction, out.maps_mut());
    Ok(out)
}

/// `L_v^T d`, a negative divergence with one-sided terms on the first and last rows.
pub fn diff_vertical_adjoint<T: Scalar>(d: &DiffField<T>) -> Result<CoefficientField<T>> {
    diff_adjoint(d, Direction::Vertical)
}

/// `reshape^T L_h^T d`.
pub fn diff_horizontal_adjoint<T: Scalar>(d: &DiffField<T>) -> Result<CoefficientField<T>> {
    diff_adjoint(d, Direction::Horizontal)
}

/// Mixed `l_{2,1}` norm: sum over groups of the group's Euclidean norm.
pub fn norm_l21<T: Scalar>(d: &DiffField<T>) -> T {
    d.group_norms().iter().copied().sum()
}

pub(crate) fn norm_l21_raw<T: Scalar>(maps: &Array3<T>) -> T {
    group_norms(maps.view()).iter().copied().sum()
}

/// Scales every group `v` in place by `s(||v||)`.
fn scale_groups<T: Scalar>(maps: &mut Array3<T>, factor: impl Fn(T) -> T) {
    let scale = group_norms(maps.view()).mapv_into(factor);
    for mut map in maps.outer_iter_mut() {
        map.zip_mut_with(&scale, |a, &b| *a = *a * b);
    }
}

pub(crate) fn soft_threshold_in_place<T: Scalar>(maps: &mut Array3<T>, tau: T) {
    scale_groups(maps, |nrm| {
        if nrm > tau {
            T::one() - tau / nrm
        } else {
            T::zero()
        }
    });
}

/// Proximal operator of `tau * ||.||_21`: each group becomes `v * max(1 - tau/||v||, 0)`.
pub fn group_soft_threshold<T: Scalar>(d: &DiffField<T>, t: GroupThreshold<T>) -> DiffField<T> {
    let mut out = d.clone();
    soft_threshold_in_place(&mut out.maps, t.tau());
    out
}

/// `p - soft(p, radius)`: by Moreau's identity, the groupwise projection onto the
/// Euclidean ball of the given radius.
pub fn dual_ball_step<T: Scalar>(p: &DiffField<T>, radius: T) -> Result<DiffField<T>> {
    let t = GroupThreshold::new(radius)?;
    let soft = group_soft_threshold(p, t);
    Ok(DiffField {
        direction: p.direction,
        degree: p.degree,
        maps: &p.maps - &soft.maps,
    })
}

/// Nearest point to `z` in the ball `{w : ||w - center||_2 <= delta}`.
pub fn project_l2_ball<T: Scalar>(z: &Image<T>, center: &Image<T>, delta: T) -> Result<Image<T>> {
    if z.dim() != center.dim() {
        return Err(Error::shape(center.dim(), z.dim()));
    }
    if !(delta >= T::zero()) {
        return Err(Error::Config(format!(
            "ball radius must be nonnegative, got {delta}"
        )));
    }
    let mut out = z.clone();
    project_l2_ball_in_place(&mut out, center, delta);
    Ok(out)
}

pub(crate) fn project_l2_ball_in_place<T: Scalar>(z: &mut Image<T>, center: &Image<T>, delta: T) {
    let dist = Zip::from(&*z)
        .and(center)
        .fold(T::zero(), |acc, &a, &c| acc + (a - c) * (a - c))
        .sqrt();
    if dist <= delta {
        return;
    }
    let scale = delta / dist;
    Zip::from(z)
        .and(center)
        .for_each(|a, &c| *a = c + (*a - c) * scale);
}
