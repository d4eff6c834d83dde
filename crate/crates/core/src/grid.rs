//! Uniform periodic grids and the nodal field containers that live on them.
//!
//! Storage is row-major with axis 0 slowest. Unused axes (for `d < 3`) have
//! extent 1 so index arithmetic is uniform across dimensions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    len: [f64; 3],
    dx: [f64; 3],
    /// Integer mode index per axis in FFT order: 0, 1, .., n/2-1, -n/2, .., -1.
    modes: [Vec<i64>; 3],
    /// Physical wavenumbers `2π m / len` per axis.
    k: [Vec<f64>; 3],
}

impl Grid {
    pub fn new(n: &[usize], len: &[f64]) -> Result<Arc<Grid>> {
        let dim = n.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if len.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} extents given for a {dim}-dimensional grid",
                len.len()
            )));
        }
        for (axis, (&ni, &li)) in n.iter().zip(len).enumerate() {
            if ni < 4 || ni % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: point count must be even and >= 4, got {ni}"
                )));
            }
            if !(li.is_finite() && li > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: extent must be positive and finite, got {li}"
                )));
            }
        }
        n.iter()
            .try_fold(1usize, |acc, &ni| acc.checked_mul(ni))
            .ok_or_else(|| Error::InvalidGrid("point count overflows usize".into()))?;

        let mut nn = [1usize; 3];
        let mut ll = [1.0f64; 3];
        let mut dx = [1.0f64; 3];
        let mut modes: [Vec<i64>; 3] = [vec![0], vec![0], vec![0]];
        let mut k: [Vec<f64>; 3] = [vec![0.0], vec![0.0], vec![0.0]];
        for axis in 0..dim {
            let ni = n[axis];
            nn[axis] = ni;
            ll[axis] = len[axis];
            dx[axis] = len[axis] / ni as f64;
            let m: Vec<i64> = (0..ni as i64)
                .map(|j| if j < ni as i64 / 2 { j } else { j - ni as i64 })
                .collect();
            let scale = 2.0 * PI / len[axis];
            k[axis] = m.iter().map(|&mi| mi as f64 * scale).collect();
            modes[axis] = m;
        }
        Ok(Arc::new(Grid { dim, n: nn, len: ll, dx, modes, k }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis; only the first `dim()` entries are meaningful.
    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn len(&self) -> &[f64] {
        &self.len[..self.dim]
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx[..self.dim]
    }

    pub fn min_dx(&self) -> f64 {
        self.dx().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest resolved wavenumber magnitude along any axis.
    pub fn k_max(&self) -> f64 {
        (0..self.dim)
            .map(|a| PI * self.n[a] as f64 / self.len[a])
            .fold(0.0, f64::max)
    }

    pub fn shape3(&self) -> [usize; 3] {
        self.n
    }

    pub fn point_count(&self) -> usize {
        self.n.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.len().iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().iter().product()
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    pub fn mode_indices(&self, axis: usize) -> &[i64] {
        &self.modes[axis]
    }

    /// Split a flat index into per-axis indices.
    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i2 = idx % self.n[2];
        let rest = idx / self.n[2];
        [rest / self.n[1], rest % self.n[1], i2]
    }

    #[inline]
    pub fn ravel(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n[1] + ijk[1]) * self.n[2] + ijk[2]
    }

    /// Physical coordinates of a node (unused axes are zero).
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let ijk = self.unravel(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = ijk[a] as f64 * self.dx[a];
        }
        x
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Scalar types a field can carry.
pub trait Sample: Copy + Default + Send + Sync + std::fmt::Debug + PartialEq + 'static {
    fn to_complex(self) -> Complex64;
    fn from_complex(c: Complex64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite_sample(self) -> bool;
}

impl Sample for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn from_complex(c: Complex64) -> Self {
        c.re
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline]
    fn is_finite_sample(self) -> bool {
        self.is_finite()
    }
}

impl Sample for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn from_complex(c: Complex64) -> Self {
        c
    }
    #[inline]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline]
    fn is_finite_sample(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Nodal samples of a scalar quantity.
#[derive(Debug, Clone)]
pub struct Field<T> {
    grid: Arc<Grid>,
    data: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: PartialEq> PartialEq for Field<T> {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.data == other.data
    }
}

impl<T: Sample> Field<T> {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field { grid: grid.clone(), data: vec![T::default(); grid.point_count()] }
    }

    pub fn constant(grid: &Arc<Grid>, value: T) -> Self {
        Field { grid: grid.clone(), data: vec![value; grid.point_count()] }
    }

    pub fn from_vec(grid: &Arc<Grid>, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.point_count() {
            return Err(Error::InvalidState(format!(
                "field has {} values, grid has {} nodes",
                data.len(),
                grid.point_count()
            )));
        }
        Ok(Field { grid: grid.clone(), data })
    }

    /// Sample a function of the physical position at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 3]) -> T) -> Self {
        let data = (0..grid.point_count()).map(|i| f(grid.position(i))).collect();
        Field { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field { grid: self.grid.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map<U: Sample, V: Sample>(
        &self,
        other: &Field<U>,
        f: impl Fn(T, U) -> V,
    ) -> Result<Field<V>> {
        ensure_same(&self.grid, &other.grid)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid.clone(), data })
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| v.to_complex())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite_sample())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }
}

impl<T> Field<T>
where
    T: Sample + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|a| a * c)
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        ensure_same(&self.grid, &other.grid)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b * c;
        }
        Ok(())
    }
}

impl RealField {
    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the smallest sample.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v < self.data[best] {
                best = i;
            }
        }
        best
    }

    /// Node-sum quadrature of the field.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

impl ComplexField {
    pub fn re(&self) -> RealField {
        self.map(|c| c.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|c| c.im)
    }

    pub fn integral(&self) -> Complex64 {
        self.data.iter().sum::<Complex64>() * self.grid.cell_volume()
    }
}

/// A `d`-component field, one scalar field per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    comps: Vec<Field<T>>,
}

pub type RealVectorField = VectorField<f64>;
pub type ComplexVectorField = VectorField<Complex64>;

impl<T: Sample> VectorField<T> {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField { comps: (0..grid.dim()).map(|_| Field::zeros(grid)).collect() }
    }

    pub fn from_components(comps: Vec<Field<T>>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::InvalidState("vector field needs at least one component".into()))?;
        let grid = first.grid().clone();
        if comps.len() != grid.dim() {
            return Err(Error::InvalidState(format!(
                "{} components for a {}-dimensional grid",
                comps.len(),
                grid.dim()
            )));
        }
        for c in &comps {
            ensure_same(&grid, c.grid())?;
        }
        Ok(VectorField { comps })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 3]) -> [T; 3]) -> Self {
        let comps = (0..grid.dim())
            .map(|a| Field::from_fn(grid, |x| f(x)[a]))
            .collect();
        VectorField { comps }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Field<T>] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Field<T>] {
        &mut self.comps
    }

    pub fn component(&self, axis: usize) -> &Field<T> {
        &self.comps[axis]
    }

    pub fn map_components<U: Sample>(&self, f: impl Fn(&Field<T>) -> Field<U>) -> VectorField<U> {
        VectorField { comps: self.comps.iter().map(f).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Field::is_finite)
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_abs(&self) -> f64 {
        let n = self.grid().point_count();
        (0..n)
            .map(|i| {
                self.comps
                    .iter()
                    .map(|c| {
                        let m = c.values()[i].modulus();
                        m * m
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise Euclidean magnitude squared.
    pub fn magnitude_sq(&self) -> RealField {
        let grid = self.grid().clone();
        let mut out = RealField::zeros(&grid);
        for c in &self.comps {
            for (o, v) in out.values_mut().iter_mut().zip(c.values()) {
                let m = v.modulus();
                *o += m * m;
            }
        }
        out
    }
}

impl<T> VectorField<T>
where
    T: Sample + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_components(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_components(other, |a, b| a.sub(b))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_components(|f| f.scaled(c))
    }

    pub fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(c, b)?;
        }
        Ok(())
    }

    fn zip_components(
        &self,
        other: &Self,
        f: impl Fn(&Field<T>, &Field<T>) -> Result<Field<T>>,
    ) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::GridMismatch);
        }
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { comps })
    }
}

impl RealVectorField {
    /// Pointwise dot product with another real vector field.
    pub fn dot(&self, other: &Self) -> Result<RealField> {
        ensure_same(self.grid(), other.grid())?;
        let mut out = RealField::zeros(self.grid());
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, x), y) in out.values_mut().iter_mut().zip(a.values()).zip(b.values()) {
                *o += x * y;
            }
        }
        Ok(out)
    }

    /// Multiply every component by a scalar field pointwise.
    pub fn times_scalar(&self, s: &RealField) -> Result<Self> {
        let comps = self
            .comps
            .iter()
            .map(|c| c.zip_map(s, |a, b| a * b))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { comps })
    }

    /// Componentwise integral.
    pub fn integral(&self) -> Vec<f64> {
        self.comps.iter().map(RealField::integral).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = Grid::new(&[8], &[2.0 * PI]).unwrap();
        let k: Vec<f64> = g.wavenumbers(0).to_vec();
        let expect = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in k.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        // Nyquist index is addressable
        assert_eq!(g.mode_indices(0)[4], -4);
    }

    #[test]
    fn two_d_spacing_and_count() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        assert_eq!(g.point_count(), 16);
        assert_eq!(g.dx(), &[0.25, 0.25]);
        assert_eq!(g.volume(), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(&[3, 4, 4], &[1.0, 1.0, 1.0]).is_err());
        assert!(Grid::new(&[2], &[1.0]).is_err());
        assert!(Grid::new(&[8], &[0.0]).is_err());
        assert!(Grid::new(&[8], &[-1.0]).is_err());
        assert!(Grid::new(&[8, 8], &[1.0]).is_err());
        assert!(Grid::new(&[4, 4, 4, 4], &[1.0; 4]).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(&[4, 6, 8], &[1.0, 2.0, 3.0]).unwrap();
        for idx in 0..g.point_count() {
            assert_eq!(g.ravel(g.unravel(idx)), idx);
        }
        let x = g.position(g.ravel([1, 2, 3]));
        assert!((x[0] - 0.25).abs() < 1e-15 && (x[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Grid::new(&[8], &[1.0]).unwrap();
        let b = Grid::new(&[8], &[2.0]).unwrap();
        let fa = RealField::zeros(&a);
        let fb = RealField::zeros(&b);
        assert!(matches!(fa.add(&fb), Err(Error::GridMismatch)));
        // structurally equal grids are interchangeable
        let c = Grid::new(&[8], &[1.0]).unwrap();
        assert!(fa.add(&RealField::zeros(&c)).is_ok());
    }
}
