//! Uniform grids over the outline, sampled fields and mollified densities.
//!
//! The mollifier is the tensor product of a 1-D quartic kernel, so the
//! convolution of a rectangle indicator with it factorizes into one profile
//! per axis. Densities and forces are assembled from those 1-D profiles.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{PefError, Result};
use crate::geometry::{rect_of, Design, ModuleShape, Placement, Point};
use crate::par;

/// Cell counts per axis; the physical extent comes from the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 256, ny: 256 }
    }
}

/// Cell-centered discretization of `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(PefError::InvalidConfig(format!(
                "grid needs at least 2 cells per axis, got {nx}x{ny}"
            )));
        }
        if !(width > 0.0 && height > 0.0) {
            return Err(PefError::InvalidConfig("grid extent must be positive".into()));
        }
        Ok(Self { nx, ny, width, height })
    }

    pub fn for_design(spec: GridSpec, design: &Design) -> Result<Self> {
        Self::new(spec.nx, spec.ny, design.width, design.height)
    }

    pub fn unit_square(n: usize) -> Self {
        Self::new(n, n, 1.0, 1.0).expect("n >= 2")
    }

    pub fn hx(&self) -> f64 {
        self.width / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.height / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx()
    }

    pub fn y_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(self.x_center(i), self.y_center(j))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values sampled at cell centers, indexed `[i, j]` with `i` along x.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.nx, grid.ny)),
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.nx, grid.ny), value),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid,
            values: Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| {
                f(grid.x_center(i), grid.y_center(j))
            }),
        }
    }

    pub fn from_values(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(PefError::ShapeMismatch {
                what: "field values",
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Midpoint-rule integral over the domain.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.grid.cell_area()
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.grid.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// L² inner product `∫ f g` by the midpoint rule.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.values.dim(), other.values.dim());
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_area()
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: &self.values * s,
        }
    }

    /// Mean of the absolute values relative to the largest magnitude; used
    /// to decide whether a field counts as zero-mean.
    pub fn relative_mean(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            self.mean().abs() / m
        }
    }
}

/// Shape of the 1-D smoothing kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelProfile {
    /// `(15/16)(1 - t²)²` on `[-1, 1]`: nonnegative, unit mass, C¹.
    #[default]
    Quartic,
}

impl KernelProfile {
    pub fn density(self, t: f64) -> f64 {
        match self {
            KernelProfile::Quartic => {
                if t.abs() >= 1.0 {
                    0.0
                } else {
                    let s = 1.0 - t * t;
                    15.0 / 16.0 * s * s
                }
            }
        }
    }

    /// Cumulative distribution of the kernel; exactly 0 below -1 and 1 above 1.
    pub fn cdf(self, t: f64) -> f64 {
        match self {
            KernelProfile::Quartic => {
                if t <= -1.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    let t2 = t * t;
                    0.5 + 15.0 / 16.0 * t * (1.0 - t2 * (2.0 / 3.0 - t2 / 5.0))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierConfig {
    /// Sup-norm support radius of the 2-D kernel.
    pub epsilon: f64,
    #[serde(default)]
    pub profile: KernelProfile,
}

impl MollifierConfig {
    pub fn quartic(epsilon: f64) -> Self {
        Self {
            epsilon,
            profile: KernelProfile::Quartic,
        }
    }
}

/// Mollified 1-D indicator of `[lo, hi]` at `x`, and its x-derivative.
fn smoothed_interval(profile: KernelProfile, lo: f64, hi: f64, eps: f64, x: f64) -> (f64, f64) {
    if eps == 0.0 {
        let v = if x >= lo && x <= hi { 1.0 } else { 0.0 };
        return (v, 0.0);
    }
    let a = (x - lo) / eps;
    let b = (hi - x) / eps;
    let v = (profile.cdf(a) + profile.cdf(b) - 1.0).clamp(0.0, 1.0);
    let d = (profile.density(a) - profile.density(b)) / eps;
    (v, d)
}

/// ψ(x) = (η_ε * 1_M)(x) for the module placed at `center`.
pub fn mollified_indicator(shape: &ModuleShape, center: Point, moll: &MollifierConfig, x: Point) -> f64 {
    let r = rect_of(shape, center);
    let (vx, _) = smoothed_interval(moll.profile, r.left, r.right, moll.epsilon, x.x);
    let (vy, _) = smoothed_interval(moll.profile, r.bottom, r.top, moll.epsilon, x.y);
    vx * vy
}

/// ∇ₓψ(x) for the module placed at `center`.
pub fn mollified_gradient(shape: &ModuleShape, center: Point, moll: &MollifierConfig, x: Point) -> [f64; 2] {
    let r = rect_of(shape, center);
    let (vx, dx) = smoothed_interval(moll.profile, r.left, r.right, moll.epsilon, x.x);
    let (vy, dy) = smoothed_interval(moll.profile, r.bottom, r.top, moll.epsilon, x.y);
    [dx * vy, vx * dy]
}

/// Fraction of `[c0, c1]` covered by `[lo, hi]`.
fn coverage(lo: f64, hi: f64, c0: f64, c1: f64) -> f64 {
    ((hi.min(c1) - lo.max(c0)).max(0.0)) / (c1 - c0)
}

/// Separable grid samples of one placed module: ψ(x_i, y_j) = `vx[i - i0] * vy[j - j0]`.
///
/// With `epsilon > 0` the entries are mollified values at cell centers and
/// `dx`, `dy` hold the matching derivatives. With `epsilon == 0` they are
/// exact cell coverage fractions and the derivatives are zero.
#[derive(Debug, Clone)]
pub struct ModuleProfile {
    pub i0: usize,
    pub vx: Vec<f64>,
    pub dx: Vec<f64>,
    pub j0: usize,
    pub vy: Vec<f64>,
    pub dy: Vec<f64>,
}

impl ModuleProfile {
    pub fn new(shape: &ModuleShape, center: Point, moll: &MollifierConfig, grid: &Grid) -> Self {
        let r = rect_of(shape, center);
        let eps = moll.epsilon;
        let axis = |lo: f64, hi: f64, h: f64, n: usize| {
            // cells whose center (or, for the sharp case, whose extent) meets the support
            let first = (((lo - eps) / h - 0.5).floor().max(0.0) as usize).min(n);
            let last = ((((hi + eps) / h + 0.5).ceil()).max(0.0) as usize).min(n);
            let mut v = Vec::with_capacity(last - first);
            let mut d = Vec::with_capacity(last - first);
            for k in first..last {
                if eps == 0.0 {
                    v.push(coverage(lo, hi, k as f64 * h, (k + 1) as f64 * h));
                    d.push(0.0);
                } else {
                    let (a, b) = smoothed_interval(moll.profile, lo, hi, eps, (k as f64 + 0.5) * h);
                    v.push(a);
                    d.push(b);
                }
            }
            (first, v, d)
        };
        let (i0, vx, dx) = axis(r.left, r.right, grid.hx(), grid.nx);
        let (j0, vy, dy) = axis(r.bottom, r.top, grid.hy(), grid.ny);
        Self { i0, vx, dx, j0, vy, dy }
    }

    pub fn x_cells(&self) -> std::ops::Range<usize> {
        self.i0..self.i0 + self.vx.len()
    }

    pub fn y_cells(&self) -> std::ops::Range<usize> {
        self.j0..self.j0 + self.vy.len()
    }

    /// `Σ_cells w(x) · (ψ, ∂ₓψ, ∂ᵧψ)(x) · cell_area` restricted to the support.
    pub fn moments(&self, weight: &ScalarField) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (a, i) in self.x_cells().enumerate() {
            let row = weight.values.row(i);
            let (mut s, mut sy) = (0.0, 0.0);
            for (b, j) in self.y_cells().enumerate() {
                let w = row[j];
                s += w * self.vy[b];
                sy += w * self.dy[b];
            }
            acc[0] += self.vx[a] * s;
            acc[1] += self.dx[a] * s;
            acc[2] += self.vx[a] * sy;
        }
        let area = weight.grid.cell_area();
        acc.map(|v| v * area)
    }
}

/// Exact coverage fraction of each cell by the placed rectangle.
pub fn rasterize_indicator(shape: &ModuleShape, center: Point, grid: &Grid) -> ScalarField {
    let p = ModuleProfile::new(shape, center, &MollifierConfig::quartic(0.0), grid);
    let mut field = ScalarField::zeros(*grid);
    for (a, i) in p.x_cells().enumerate() {
        for (b, j) in p.y_cells().enumerate() {
            field.values[[i, j]] = p.vx[a] * p.vy[b];
        }
    }
    field
}

pub fn module_profiles(design: &Design, placement: &Placement, moll: &MollifierConfig, grid: &Grid) -> Vec<ModuleProfile> {
    par::map_indexed(design.len(), |m| {
        ModuleProfile::new(&design.modules[m], placement.centers[m], moll, grid)
    })
}

/// Sampled mollified density with its quadrature mass.
#[derive(Debug, Clone)]
pub struct Density {
    pub field: ScalarField,
    pub mass: f64,
}

/// Sums precomputed module profiles into a density field.
///
/// Rows are filled independently; inside a row modules are added in index
/// order, so the result does not depend on the thread count.
pub fn density_from_profiles(profiles: &[ModuleProfile], grid: &Grid) -> Density {
    let mut values = Array2::<f64>::zeros((grid.nx, grid.ny));
    let ny = grid.ny;
    par::for_each_row(values.as_slice_mut().expect("standard layout"), ny, |i, row| {
        for p in profiles {
            if !p.x_cells().contains(&i) {
                continue;
            }
            let vx = p.vx[i - p.i0];
            if vx == 0.0 {
                continue;
            }
            for (b, j) in p.y_cells().enumerate() {
                row[j] += vx * p.vy[b];
            }
        }
    });
    let field = ScalarField { grid: *grid, values };
    let mass = field.integral();
    Density { field, mass }
}

/// ρ_ε(x; c) = Σ_i ψ_i(x − c_i) at cell centers. `epsilon == 0` gives the
/// exact-coverage rasterization of the sharp indicators.
pub fn density(design: &Design, placement: &Placement, moll: &MollifierConfig, grid: &Grid) -> Result<Density> {
    crate::geometry::check_len("placement", design.len(), placement.len())?;
    let profiles = module_profiles(design, placement, moll, grid);
    Ok(density_from_profiles(&profiles, grid))
}

/// f = ρ − ρ̄ with the remaining discrete mean removed, so `∫ f = 0` holds
/// on the grid to rounding.
pub fn residual(rho: &ScalarField, rho_bar: f64) -> ScalarField {
    let mut values = &rho.values - rho_bar;
    let m = values.mean().unwrap_or(0.0);
    values -= m;
    ScalarField {
        grid: rho.grid,
        values,
    }
}

/// Var = ∫ f² by the midpoint rule.
pub fn variance(f: &ScalarField) -> f64 {
    f.dot(f)
}
