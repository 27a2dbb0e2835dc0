//! Polynomial bases and the overcomplete synthesis operator.
//!
//! An image `y` of size `M x N` is modelled as `y = sum_{k,l} p_kl ⊙ x_kl`, where the
//! basis images `p_kl = p_k,v · p_l,h^T` are outer products of 1D polynomial bases and
//! the `x_kl` are per-pixel parameter maps. The operator is never assembled as a
//! matrix; it is applied pixelwise.
//!
//! Index convention used project-wide: the map for `(k, l)` lives at group index
//! `k * (K + 1) + l`, and flattening vectorizes each map column by column before
//! concatenating the maps in group order.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grayscale image, rows x columns.
pub type Image<T> = Array2<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Standard,
    Orthonormal,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(BasisKind::Standard),
            "orthonormal" => Ok(BasisKind::Orthonormal),
            other => Err(Error::Config(format!("unknown basis kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisKind::Standard => "standard",
            BasisKind::Orthonormal => "orthonormal",
        })
    }
}

/// Number of parameter maps for polynomial degree `degree`.
pub fn group_size(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// `K + 1` sampled polynomials of a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1D<T> {
    degree: usize,
    kind: BasisKind,
    vectors: Vec<Array1<T>>,
}

/// Sample grid `t_n = n / (len - 1)` on `[0, 1]`; a single sample sits at 0.
fn unit_grid<T: Scalar>(len: usize) -> Array1<T> {
    if len == 1 {
        return Array1::zeros(1);
    }
    let step = T::of((len - 1) as f64);
    Array1::from_shape_fn(len, |n| T::of(n as f64) / step)
}

fn check_length(degree: usize, length: usize) -> Result<()> {
    if length < degree + 1 {
        return Err(Error::DegenerateBasis(format!(
            "length {length} cannot support {} independent polynomials of degree {degree}",
            degree + 1
        )));
    }
    Ok(())
}

impl<T: Scalar> Basis1D<T> {
    /// Monomials `1, t, ..., t^K` sampled on the unit grid.
    pub fn standard(degree: usize, length: usize) -> Result<Self> {
        check_length(degree, length)?;
        let grid = unit_grid::<T>(length);
        let vectors = (0..=degree)
            .map(|k| grid.mapv(|t| t.powi(k as i32)))
            .collect();
        Ok(Self {
            degree,
            kind: BasisKind::Standard,
            vectors,
        })
    }

    /// Orthonormalizes the standard basis by modified Gram-Schmidt in increasing degree.
    ///
    /// Each vector is swept twice against its predecessors so the Gram matrix stays at
    /// identity to working precision even for longer grids.
    pub fn orthonormal(degree: usize, length: usize) -> Result<Self> {
        let standard = Self::standard(degree, length)?;
        let rank_tol = T::epsilon().sqrt();
        let mut vectors: Vec<Array1<T>> = Vec::with_capacity(degree + 1);
        for (k, v) in standard.vectors.into_iter().enumerate() {
            let original = norm(&v);
            let mut w = v;
            for _pass in 0..2 {
                for q in &vectors {
                    let proj = q.dot(&w);
                    w.scaled_add(-proj, q);
                }
            }
            let n = norm(&w);
            if !(n > rank_tol * original) {
                return Err(Error::DegenerateBasis(format!(
                    "polynomial of degree {k} is numerically dependent on lower degrees"
                )));
            }
            w.mapv_inplace(|e| e / n);
            vectors.push(w);
        }
        Ok(Self {
            degree,
            kind: BasisKind::Orthonormal,
            vectors,
        })
    }

    pub fn new(degree: usize, length: usize, kind: BasisKind) -> Result<Self> {
        match kind {
            BasisKind::Standard => Self::standard(degree, length),
            BasisKind::Orthonormal => Self::orthonormal(degree, length),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn vectors(&self) -> &[Array1<T>] {
        &self.vectors
    }

    /// `(K+1) x (K+1)` matrix of pairwise inner products.
    pub fn gram(&self) -> Array2<T> {
        let n = self.vectors.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.vectors[i].dot(&self.vectors[j]))
    }
}

fn norm<T: Scalar>(v: &Array1<T>) -> T {
    v.dot(v).sqrt()
}

/// The `(K+1)^2` separable basis images.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis2D<T> {
    vertical: Basis1D<T>,
    horizontal: Basis1D<T>,
    images: Array3<T>,
}

impl<T: Scalar> Basis2D<T> {
    pub fn new(vertical: Basis1D<T>, horizontal: Basis1D<T>) -> Result<Self> {
        if vertical.degree() != horizontal.degree() {
            return Err(Error::Config(format!(
                "vertical degree {} differs from horizontal degree {}",
                vertical.degree(),
                horizontal.degree()
            )));
        }
        let order = vertical.degree() + 1;
        let (rows, cols) = (vertical.len(), horizontal.len());
        let mut images = Array3::zeros((order * order, rows, cols));
        for (k, pv) in vertical.vectors().iter().enumerate() {
            for (l, ph) in horizontal.vectors().iter().enumerate() {
                let mut img = images.index_axis_mut(Axis(0), k * order + l);
                Zip::indexed(&mut img).for_each(|(m, n), e| *e = pv[m] * ph[n]);
            }
        }
        Ok(Self {
            vertical,
            horizontal,
            images,
        })
    }

    /// Same kind of basis in both directions, sized for an `rows x cols` image.
    pub fn for_image(degree: usize, rows: usize, cols: usize, kind: BasisKind) -> Result<Self> {
        Self::new(
            Basis1D::new(degree, rows, kind)?,
            Basis1D::new(degree, cols, kind)?,
        )
    }

    pub fn degree(&self) -> usize {
        self.vertical.degree()
    }

    pub fn kind(&self) -> BasisKind {
        self.vertical.kind()
    }

    pub fn vertical(&self) -> &Basis1D<T> {
        &self.vertical
    }

    pub fn horizontal(&self) -> &Basis1D<T> {
        &self.horizontal
    }

    /// Image dimensions `(M, N)`.
    pub fn dim(&self) -> (usize, usize) {
        (self.vertical.len(), self.horizontal.len())
    }

    pub fn image(&self, k: usize, l: usize) -> ArrayView2<'_, T> {
        let order = self.degree() + 1;
        self.images.index_axis(Axis(0), k * order + l)
    }

    /// All basis images stacked along the first axis in group order.
    pub fn images(&self) -> &Array3<T> {
        &self.images
    }
}

/// Parameter maps `x_kl`, stacked as a `(K+1)^2 x M x N` array.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField<T> {
    degree: usize,
    maps: Array3<T>,
}

impl<T: Scalar> CoefficientField<T> {
    pub fn zeros(degree: usize, rows: usize, cols: usize) -> Self {
        Self {
            degree,
            maps: Array3::zeros((group_size(degree), rows, cols)),
        }
    }

    pub fn from_maps(degree: usize, maps: Array3<T>) -> Result<Self> {
        if maps.len_of(Axis(0)) != group_size(degree) {
            return Err(Error::shape(
                format!("{} maps", group_size(degree)),
                format!("{} maps", maps.len_of(Axis(0))),
            ));
        }
        Ok(Self { degree, maps })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Map dimensions `(M, N)`.
    pub fn dim(&self) -> (usize, usize) {
        let (_, m, n) = self.maps.dim();
        (m, n)
    }

    pub fn maps(&self) -> &Array3<T> {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut Array3<T> {
        &mut self.maps
    }

    pub fn into_maps(self) -> Array3<T> {
        self.maps
    }

    pub fn map(&self, k: usize, l: usize) -> ArrayView2<'_, T> {
        self.maps.index_axis(Axis(0), k * (self.degree + 1) + l)
    }

    /// Column-major vectorization of each map, concatenated in `(k, l)` order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.maps.len());
        for map in self.maps.outer_iter() {
            out.extend(map.t().iter().copied());
        }
        out
    }

    /// Inverse of [`CoefficientField::flatten`].
    pub fn unflatten(degree: usize, rows: usize, cols: usize, data: &[T]) -> Result<Self> {
        let groups = group_size(degree);
        if data.len() != groups * rows * cols {
            return Err(Error::shape(groups * rows * cols, data.len()));
        }
        let mut maps = Array3::zeros((groups, rows, cols));
        for (g, chunk) in data.chunks_exact(rows * cols).enumerate() {
            let mut map = maps.index_axis_mut(Axis(0), g);
            for (c, column) in chunk.chunks_exact(rows).enumerate() {
                map.column_mut(c).assign(&ndarray::ArrayView1::from(column));
            }
        }
        Ok(Self { degree, maps })
    }

    pub fn norm(&self) -> T {
        self.maps.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        Zip::from(&self.maps)
            .and(&other.maps)
            .fold(T::zero(), |acc, &a, &b| acc + a * b)
    }

    pub fn is_finite(&self) -> bool {
        self.maps.iter().all(|v| v.is_finite())
    }
}

/// The synthesis operator `P = [P_00 | ... | P_KK]` with `P_kl = diag(vec(p_kl))`.
#[derive(Debug, Clone)]
pub struct SynthesisOperator<T> {
    basis: Basis2D<T>,
}

impl<T: Scalar> SynthesisOperator<T> {
    pub fn new(basis: Basis2D<T>) -> Self {
        Self { basis }
    }

    pub fn for_image(degree: usize, rows: usize, cols: usize, kind: BasisKind) -> Result<Self> {
        Ok(Self::new(Basis2D::for_image(degree, rows, cols, kind)?))
    }

    pub fn basis(&self) -> &Basis2D<T> {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.basis.dim()
    }

    fn check_field(&self, x: &CoefficientField<T>) -> Result<()> {
        let want = self.basis.images().dim();
        let got = x.maps().dim();
        if want != got {
            return Err(Error::shape(want, got));
        }
        Ok(())
    }

    fn check_image(&self, y: &Image<T>) -> Result<()> {
        if y.dim() != self.dim() {
            return Err(Error::shape(self.dim(), y.dim()));
        }
        Ok(())
    }

    /// `y = sum_kl p_kl ⊙ x_kl`.
    pub fn apply(&self, x: &CoefficientField<T>) -> Result<Image<T>> {
        self.check_field(x)?;
        Ok(self.apply_unchecked(x.maps()))
    }

    pub(crate) fn apply_unchecked(&self, maps: &Array3<T>) -> Image<T> {
        let mut out = Array2::zeros(self.dim());
        for (p, x) in self.basis.images().outer_iter().zip(maps.outer_iter()) {
            Zip::from(&mut out)
                .and(&p)
                .and(&x)
                .for_each(|o, &p, &x| *o = *o + p * x);
        }
        out
    }

    /// Adjoint: map `(k, l)` of the result is `p_kl ⊙ y`.
    pub fn adjoint(&self, y: &Image<T>) -> Result<CoefficientField<T>> {
        self.check_image(y)?;
        Ok(CoefficientField {
            degree: self.degree(),
            maps: self.adjoint_unchecked(y),
        })
    }

    pub(crate) fn adjoint_unchecked(&self, y: &Image<T>) -> Array3<T> {
        let mut maps = self.basis.images().clone();
        for mut map in maps.outer_iter_mut() {
            map.zip_mut_with(y, |a, &b| *a = *a * b);
        }
        maps
    }

    /// Diagonal of `P P^T` as an image: `sum_kl p_kl^2` per pixel.
    pub fn diag_ppt(&self) -> Image<T> {
        self.basis
            .images()
            .fold_axis(Axis(0), T::zero(), |&acc, &p| acc + p * p)
    }

    /// `max diag(P P^T)`, which equals `||P||^2` because `P P^T` is diagonal.
    pub fn max_diag_ppt(&self) -> T {
        self.diag_ppt()
            .iter()
            .copied()
            .fold(T::zero(), |a, b| a.max(b))
    }
}
