//! Uniform periodic grids on the d-torus and second-order centered operators.
//!
//! Storage is row-major: the point with integer coordinates `(i0, i1, i2)`
//! lives at `(i0 * n + i1) * n + i2` (axis 0 varies slowest). Point `i` along
//! an axis sits at `x = i * dx`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    Dimension(usize),
    #[error("points per axis must be even and at least 8, got {0}")]
    Points(usize),
    #[error("grid period must be positive and finite, got {0}")]
    Length(f64),
    #[error("weight is negative ({value}) at grid index {index}")]
    NegativeWeight { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
    length: f64,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(GridError::Points(n));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(GridError::Length(length));
        }
        Ok(Self { dim, n, length })
    }

    /// Grid on the standard torus of period `2 pi`.
    pub fn torus(dim: usize, n: usize) -> Result<Self, GridError> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical coordinates of a flat index; unused axes are zero.
    pub fn coords(&self, index: usize) -> [f64; 3] {
        let dx = self.dx();
        let mut out = [0.0; 3];
        let mut rest = index;
        for axis in (0..self.dim).rev() {
            out[axis] = (rest % self.n) as f64 * dx;
            rest /= self.n;
        }
        out
    }

    /// `(outer, inner)` block sizes around `axis` for strided traversal.
    fn strides(&self, axis: usize) -> (usize, usize) {
        let outer = self.n.pow(axis as u32);
        let inner = self.n.pow((self.dim - 1 - axis) as u32);
        (outer, inner)
    }

    /// Visit every point with its two periodic neighbours along `axis`:
    /// `visit(index, minus, plus)`.
    fn for_each_neighbour(&self, axis: usize, mut visit: impl FnMut(usize, usize, usize)) {
        let n = self.n;
        let (outer, inner) = self.strides(axis);
        for o in 0..outer {
            for i in 0..n {
                let im = if i == 0 { n - 1 } else { i - 1 };
                let ip = if i + 1 == n { 0 } else { i + 1 };
                let base = o * n;
                for r in 0..inner {
                    visit(
                        (base + i) * inner + r,
                        (base + im) * inner + r,
                        (base + ip) * inner + r,
                    );
                }
            }
        }
    }
}

/// Fixed-order pairwise summation; the result depends only on the slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: PeriodicGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size does not match grid");
        Self { grid, values }
    }

    pub fn constant(grid: PeriodicGrid, value: f64) -> Self {
        Self::from_values(grid, vec![value; grid.len()])
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid, values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

/// A vector field stored component by component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: PeriodicGrid,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn from_components(components: Vec<ScalarField>) -> Self {
        let grid = *components
            .first()
            .expect("vector field needs at least one component")
            .grid();
        assert_eq!(components.len(), grid.dim(), "need one component per axis");
        assert!(components.iter().all(|c| *c.grid() == grid));
        Self { grid, components }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let components = (0..grid.dim())
            .map(|c| ScalarField::from_fn(grid, |x| f(x)[c]))
            .collect();
        Self { grid, components }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn component(&self, axis: usize) -> &ScalarField {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.components[axis]
    }

    /// Pointwise Euclidean magnitude squared.
    pub fn magnitude_sq(&self) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        for c in &self.components {
            for (o, v) in out.values.iter_mut().zip(&c.values) {
                *o += v * v;
            }
        }
        out
    }

    pub fn magnitude(&self) -> ScalarField {
        self.magnitude_sq().map(f64::sqrt)
    }

    pub fn scale_by(&self, weight: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.zip_map(weight, |a, w| a * w))
                .collect(),
        }
    }

    pub fn axpy(&mut self, scale: f64, other: &Self) {
        for (a, b) in self.components.iter_mut().zip(&other.components) {
            a.axpy(scale, b);
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.zip_map(b, |x, y| x - y))
                .collect(),
        }
    }
}

/// Centered first difference along one axis.
pub fn partial(f: &ScalarField, axis: usize) -> ScalarField {
    let grid = *f.grid();
    let inv = 0.5 / grid.dx();
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    grid.for_each_neighbour(axis, |i, m, p| out[i] = (v[p] - v[m]) * inv);
    ScalarField::from_values(grid, out)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = *f.grid();
    VectorField::from_components((0..grid.dim()).map(|a| partial(f, a)).collect())
}

pub fn divergence(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    let mut out = partial(v.component(0), 0);
    for axis in 1..grid.dim() {
        let d = partial(v.component(axis), axis);
        out.axpy(1.0, &d);
    }
    out
}

/// Nearest-neighbour Laplacian `sum_a (f[i+1] - 2 f[i] + f[i-1]) / dx^2`.
///
/// This is not `divergence(gradient(f))`, which is the wider `2 dx` stencil.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = *f.grid();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for axis in 0..grid.dim() {
        grid.for_each_neighbour(axis, |i, m, p| out[i] += (v[p] - 2.0 * v[i] + v[m]) * inv);
    }
    ScalarField::from_values(grid, out)
}

pub fn vector_laplacian(v: &VectorField) -> VectorField {
    VectorField::from_components(v.components().iter().map(laplacian).collect())
}

/// Pointwise `|grad v|^2 = sum_{a,b} (d_a v_b)^2` of a vector field.
pub fn jacobian_norm_sq(v: &VectorField) -> ScalarField {
    let grid = *v.grid();
    let mut out = ScalarField::zeros(grid);
    for comp in v.components() {
        for axis in 0..grid.dim() {
            let d = partial(comp, axis);
            for (o, x) in out.values_mut().iter_mut().zip(d.values()) {
                *o += x * x;
            }
        }
    }
    out
}

/// `sum(values) * cell volume`, summed pairwise.
pub fn integrate(f: &ScalarField) -> f64 {
    pairwise_sum(f.values()) * f.grid().cell_volume()
}

/// Exponent of a discrete Lebesgue norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L2,
    L3,
    L6,
    Inf,
}

impl Norm {
    fn exponent(self) -> Option<i32> {
        match self {
            Norm::L2 => Some(2),
            Norm::L3 => Some(3),
            Norm::L6 => Some(6),
            Norm::Inf => None,
        }
    }
}

pub fn norm(f: &ScalarField, p: Norm) -> f64 {
    match p.exponent() {
        None => f.sup_abs(),
        Some(k) => {
            let powered = f.map(|v| v.abs().powi(k));
            integrate(&powered).powf(1.0 / k as f64)
        }
    }
}

/// Norm of the pointwise Euclidean magnitude of a vector field.
pub fn vector_norm(v: &VectorField, p: Norm) -> f64 {
    match p {
        Norm::L2 => integrate(&v.magnitude_sq()).sqrt(),
        _ => norm(&v.magnitude(), p),
    }
}

/// `(int weight |v|^2 dx)^(1/2)`; the weight must be nonnegative.
pub fn weighted_l2(weight: &ScalarField, v: &VectorField) -> Result<f64, GridError> {
    if let Some((index, &value)) = weight.values().iter().enumerate().find(|(_, &w)| w < 0.0) {
        return Err(GridError::NegativeWeight { index, value });
    }
    let integrand = v.magnitude_sq().zip_map(weight, |m, w| m * w);
    Ok(integrate(&integrand).sqrt())
}

/// Componentwise spatial integral of a vector field.
pub fn integrate_vector(v: &VectorField) -> Vec<f64> {
    v.components().iter().map(integrate).collect()
}
