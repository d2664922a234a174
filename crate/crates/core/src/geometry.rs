//! Axis-aligned rectangle geometry: placed modules, overlap sets and erosion.
//!
//! All areas here are exact. The overlap set of a placement is the union of
//! the pairwise intersections of the placed rectangles; its area is computed
//! by coordinate compression over the intersection rectangles, so regions
//! covered by three or more modules are counted once.

use serde::{Deserialize, Serialize};

use crate::error::{PefError, Result};
use crate::par;
use crate::wirelength::Netlist;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Dimensions of a hard rectangular module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleShape {
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

impl ModuleShape {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(PefError::InvalidConfig(format!(
                "module dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width + self.height)
    }

    pub fn inradius(&self) -> f64 {
        0.5 * self.width.min(self.height)
    }
}

/// Closed axis-aligned rectangle `[left, right] x [bottom, top]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRect {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

impl AxisRect {
    pub fn area(&self) -> f64 {
        (self.right - self.left).max(0.0) * (self.top - self.bottom).max(0.0)
    }

    /// Intersection with positive area, or `None` (touching edges give `None`).
    pub fn intersect(&self, other: &AxisRect) -> Option<AxisRect> {
        let r = AxisRect {
            left: self.left.max(other.left),
            right: self.right.min(other.right),
            bottom: self.bottom.max(other.bottom),
            top: self.top.min(other.top),
        };
        (r.left < r.right && r.bottom < r.top).then_some(r)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.left && p.x <= self.right && p.y >= self.bottom && p.y <= self.top
    }
}

/// The static problem instance: module shapes, outline and netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub modules: Vec<ModuleShape>,
    pub width: f64,
    pub height: f64,
    pub netlist: Netlist,
}

impl Design {
    /// Validates that every module fits the outline and every pin index exists.
    pub fn new(modules: Vec<ModuleShape>, width: f64, height: f64, netlist: Netlist) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(PefError::InvalidConfig(format!(
                "domain must have positive finite size, got {width}x{height}"
            )));
        }
        for (i, m) in modules.iter().enumerate() {
            if m.width > width || m.height > height {
                return Err(PefError::InfeasibleBox {
                    module: i,
                    width: m.width,
                    height: m.height,
                    domain_width: width,
                    domain_height: height,
                });
            }
        }
        netlist.validate(modules.len())?;
        Ok(Self {
            modules,
            width,
            height,
            netlist,
        })
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn domain_area(&self) -> f64 {
        self.width * self.height
    }

    pub fn total_area(&self) -> f64 {
        self.modules.iter().map(ModuleShape::area).sum()
    }

    /// Mean density ρ̄ = Σ A_i / |R|.
    pub fn mean_density(&self) -> f64 {
        self.total_area() / self.domain_area()
    }

    pub fn check_density_feasible(&self) -> Result<()> {
        let rho_bar = self.mean_density();
        if rho_bar < 2.0 {
            Ok(())
        } else {
            Err(PefError::DensityInfeasible { rho_bar })
        }
    }

    pub fn min_inradius(&self) -> f64 {
        self.modules
            .iter()
            .map(ModuleShape::inradius)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_erosion(&self, epsilon: f64) -> Result<()> {
        let inradius = self.min_inradius();
        if epsilon < inradius {
            Ok(())
        } else {
            Err(PefError::ErosionTooLarge { epsilon, inradius })
        }
    }

    /// Feasible interval of the x (resp. y) center coordinate of module `i`.
    pub fn x_range(&self, i: usize) -> (f64, f64) {
        let w = self.modules[i].width;
        (0.5 * w, self.width - 0.5 * w)
    }

    pub fn y_range(&self, i: usize) -> (f64, f64) {
        let h = self.modules[i].height;
        (0.5 * h, self.height - 0.5 * h)
    }

    /// Copy of the design with each module area scaled by `scale[i]`
    /// (both sides scaled by its square root, preserving aspect ratio).
    pub fn with_area_scales(&self, scale: &[f64]) -> Result<Self> {
        check_len("area scales", self.len(), scale.len())?;
        let modules = self
            .modules
            .iter()
            .zip(scale)
            .map(|(m, s)| ModuleShape::new(m.width * s.sqrt(), m.height * s.sqrt()))
            .collect::<Result<Vec<_>>>()?;
        Design::new(modules, self.width, self.height, self.netlist.clone())
    }
}

/// Module centers, one per module.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Placement {
    pub centers: Vec<Point>,
}

impl Placement {
    pub fn new(centers: Vec<Point>) -> Self {
        Self { centers }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Flattened `[x0, y0, x1, y1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.centers.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            centers: flat.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect(),
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            centers: self
                .centers
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    /// Euclidean distance between the flattened coordinate vectors.
    pub fn distance(&self, other: &Placement) -> f64 {
        self.centers
            .iter()
            .zip(&other.centers)
            .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(PefError::ShapeMismatch {
            what,
            expected,
            actual,
        })
    }
}

pub fn rect_of(shape: &ModuleShape, center: Point) -> AxisRect {
    let (hw, hh) = (0.5 * shape.width, 0.5 * shape.height);
    AxisRect {
        left: center.x - hw,
        right: center.x + hw,
        bottom: center.y - hh,
        top: center.y + hh,
    }
}

/// Shrinks each side by `epsilon`. For an axis-aligned rectangle this is the
/// Minkowski erosion by a disk (and by a square) of radius `epsilon`.
pub fn eroded_shape(shape: &ModuleShape, epsilon: f64) -> Result<ModuleShape> {
    let inradius = shape.inradius();
    if !(epsilon < inradius) || epsilon < 0.0 {
        return Err(PefError::ErosionTooLarge { epsilon, inradius });
    }
    Ok(ModuleShape {
        width: shape.width - 2.0 * epsilon,
        height: shape.height - 2.0 * epsilon,
    })
}

pub fn total_perimeter(design: &Design) -> f64 {
    design.modules.iter().map(ModuleShape::perimeter).sum()
}

/// Placed rectangles of all modules.
pub fn placed_rects(design: &Design, placement: &Placement) -> Result<Vec<AxisRect>> {
    check_len("placement", design.len(), placement.len())?;
    Ok(design
        .modules
        .iter()
        .zip(&placement.centers)
        .map(|(m, &c)| rect_of(m, c))
        .collect())
}

/// All pairwise intersections with positive area, `i < j` order.
pub fn pairwise_intersections(rects: &[AxisRect]) -> Vec<AxisRect> {
    let mut out = Vec::new();
    for (i, a) in rects.iter().enumerate() {
        for b in &rects[i + 1..] {
            if let Some(r) = a.intersect(b) {
                out.push(r);
            }
        }
    }
    out
}

/// Exact area of a union of rectangles.
///
/// The x breakpoints split the plane into slabs; inside a slab the covered
/// set is a union of y intervals, merged after sorting.
pub fn union_area(rects: &[AxisRect]) -> f64 {
    let rects: Vec<&AxisRect> = rects.iter().filter(|r| r.area() > 0.0).collect();
    if rects.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.left, r.right]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let slabs = par::map_indexed(xs.len() - 1, |k| {
        let (x0, x1) = (xs[k], xs[k + 1]);
        let mut spans: Vec<(f64, f64)> = rects
            .iter()
            .filter(|r| r.left <= x0 && r.right >= x1)
            .map(|r| (r.bottom, r.top))
            .collect();
        if spans.is_empty() {
            return 0.0;
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let (mut lo, mut hi) = spans[0];
        for &(b, t) in &spans[1..] {
            if b > hi {
                covered += hi - lo;
                lo = b;
                hi = t;
            } else if t > hi {
                hi = t;
            }
        }
        covered += hi - lo;
        covered * (x1 - x0)
    });
    slabs.iter().sum()
}

/// |O(c)|: area of the union of pairwise intersections of placed modules.
pub fn overlap_area(design: &Design, placement: &Placement) -> Result<f64> {
    let rects = placed_rects(design, placement)?;
    Ok(union_area(&pairwise_intersections(&rects)))
}

/// |O_ε(c)|: the same union for modules eroded by `epsilon`.
pub fn eroded_overlap_area(design: &Design, placement: &Placement, epsilon: f64) -> Result<f64> {
    check_len("placement", design.len(), placement.len())?;
    let rects = design
        .modules
        .iter()
        .zip(&placement.centers)
        .map(|(m, &c)| eroded_shape(m, epsilon).map(|e| rect_of(&e, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(union_area(&pairwise_intersections(&rects)))
}
