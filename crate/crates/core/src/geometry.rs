//! Domain, grid and slider profiles.
//!
//! The film occupies an axis-aligned rectangle that strictly contains the
//! origin. The gap between the slider and the plane is `h0(x) + eta(t)`,
//! where `h0` vanishes at the contact set and is nonnegative elsewhere.

use std::f64::consts::PI;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};

/// A point `(x1, x2)` of the plane.
pub type Point = [f64; 2];

/// Axis-aligned rectangle `]x1_min, x1_max[ x ]x2_min, x2_max[` containing 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainRect {
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl DomainRect {
    pub fn new(x1_min: f64, x1_max: f64, x2_min: f64, x2_max: f64) -> Result<Self> {
        let all_finite = [x1_min, x1_max, x2_min, x2_max].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidDomain("bounds must be finite".into()));
        }
        if !(x1_min < 0.0 && 0.0 < x1_max && x2_min < 0.0 && 0.0 < x2_max) {
            return Err(Error::InvalidDomain(format!(
                "origin must lie strictly inside [{x1_min}, {x1_max}] x [{x2_min}, {x2_max}]"
            )));
        }
        Ok(Self {
            x1_min,
            x1_max,
            x2_min,
            x2_max,
        })
    }

    /// Square `[-half, half]^2`.
    pub fn centered_square(half: f64) -> Result<Self> {
        Self::new(-half, half, -half, half)
    }

    pub fn len1(&self) -> f64 {
        self.x1_max - self.x1_min
    }

    pub fn len2(&self) -> f64 {
        self.x2_max - self.x2_min
    }

    pub fn area(&self) -> f64 {
        self.len1() * self.len2()
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x1_min && p[0] <= self.x1_max && p[1] >= self.x2_min && p[1] <= self.x2_max
    }

    /// First Dirichlet eigenvalue of `-Laplace` on the rectangle.
    pub fn first_dirichlet_eigenvalue(&self) -> f64 {
        PI * PI * (1.0 / self.len1().powi(2) + 1.0 / self.len2().powi(2))
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            [self.x1_min, self.x2_min],
            [self.x1_max, self.x2_min],
            [self.x1_max, self.x2_max],
            [self.x1_min, self.x2_max],
        ]
    }
}

/// Uniform grid of interior nodes; the boundary nodes carry zero pressure.
///
/// Interior node `(i, j)` sits at `(x1_min + (i+1) dx, x2_min + (j+1) dy)` and
/// has linear index `j * nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    pub domain: DomainRect,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

pub fn build_grid(domain: DomainRect, nx: usize, ny: usize) -> Result<Grid> {
    Grid::new(domain, nx, ny)
}

impl Grid {
    pub fn new(domain: DomainRect, nx: usize, ny: usize) -> Result<Self> {
        // re-validate in case the rectangle was built by struct literal
        let domain = DomainRect::new(domain.x1_min, domain.x1_max, domain.x2_min, domain.x2_max)?;
        if nx < 3 || ny < 3 {
            return Err(Error::TooCoarse { nx, ny });
        }
        Ok(Self {
            domain,
            nx,
            ny,
            dx: domain.len1() / (nx + 1) as f64,
            dy: domain.len2() / (ny + 1) as f64,
        })
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Coordinate of column `i`; `i` may range over `-1..=nx` to reach the boundary.
    pub fn x1(&self, i: isize) -> f64 {
        self.domain.x1_min + (i + 1) as f64 * self.dx
    }

    pub fn x2(&self, j: isize) -> f64 {
        self.domain.x2_min + (j + 1) as f64 * self.dy
    }

    pub fn node(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        [self.x1(i as isize), self.x2(j as isize)]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|k| self.node(k))
    }

    /// Largest of the two spacings.
    pub fn spacing(&self) -> f64 {
        self.dx.max(self.dy)
    }
}

/// Nodal heights and slopes on a full grid (interior plus boundary nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct HeightTable {
    domain: DomainRect,
    /// Node counts including the boundary, i.e. `nx + 2` and `ny + 2`.
    cols: usize,
    rows: usize,
    heights: Vec<f64>,
    slopes: Vec<f64>,
}

impl HeightTable {
    /// Builds a table over the full node set of `grid` (boundary included),
    /// stored row by row with `x1` varying fastest.
    pub fn new(grid: &Grid, heights: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        let cols = grid.nx + 2;
        let rows = grid.ny + 2;
        let n = cols * rows;
        if heights.len() != n || slopes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: heights.len().min(slopes.len()),
            });
        }
        if heights.iter().chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::InvalidShape("table contains non-finite values".into()));
        }
        if let Some(h) = heights.iter().find(|&&h| h < 0.0) {
            return Err(Error::InvalidShape(format!("negative height {h}")));
        }
        let table = Self {
            domain: grid.domain,
            cols,
            rows,
            heights,
            slopes,
        };
        let nearest = table.nearest_to_origin();
        let min = table.heights.iter().cloned().fold(f64::INFINITY, f64::min);
        if min != 0.0 || table.heights[nearest] != 0.0 {
            return Err(Error::InvalidShape(
                "minimum height must be 0 and attained at the node nearest the origin".into(),
            ));
        }
        Ok(table)
    }

    /// Reads `x1,x2,h0,dh0_dx1` rows (with header) covering every node of
    /// `grid`, boundary included, in any order.
    pub fn from_csv<R: Read>(reader: R, grid: &Grid) -> Result<Self> {
        let cols = grid.nx + 2;
        let rows = grid.ny + 2;
        let n = cols * rows;
        let mut heights = vec![f64::NAN; n];
        let mut slopes = vec![f64::NAN; n];
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let snap = 1e-6;
        let mut count = 0;
        for record in rdr.records() {
            let record = record?;
            if record.len() != 4 {
                return Err(Error::InvalidShape(format!(
                    "expected 4 columns, found {}",
                    record.len()
                )));
            }
            let mut vals = [0.0; 4];
            for (v, field) in vals.iter_mut().zip(record.iter()) {
                *v = field
                    .parse()
                    .map_err(|_| Error::InvalidShape(format!("bad number `{field}`")))?;
            }
            let fi = (vals[0] - grid.domain.x1_min) / grid.dx;
            let fj = (vals[1] - grid.domain.x2_min) / grid.dy;
            let (i, j) = (fi.round(), fj.round());
            if (fi - i).abs() > snap || (fj - j).abs() > snap || i < 0.0 || j < 0.0 {
                return Err(Error::OutOfDomain {
                    x1: vals[0],
                    x2: vals[1],
                });
            }
            let (i, j) = (i as usize, j as usize);
            if i >= cols || j >= rows {
                return Err(Error::OutOfDomain {
                    x1: vals[0],
                    x2: vals[1],
                });
            }
            let k = j * cols + i;
            if !heights[k].is_nan() {
                return Err(Error::InvalidShape(format!(
                    "duplicate row for node ({}, {})",
                    vals[0], vals[1]
                )));
            }
            heights[k] = vals[2];
            slopes[k] = vals[3];
            count += 1;
        }
        if count != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: count,
            });
        }
        Self::new(grid, heights, slopes)
    }

    fn spacing(&self) -> (f64, f64) {
        (
            self.domain.len1() / (self.cols - 1) as f64,
            self.domain.len2() / (self.rows - 1) as f64,
        )
    }

    fn nearest_to_origin(&self) -> usize {
        let (dx, dy) = self.spacing();
        let i = (-self.domain.x1_min / dx).round() as usize;
        let j = (-self.domain.x2_min / dy).round() as usize;
        j.min(self.rows - 1) * self.cols + i.min(self.cols - 1)
    }

    fn interpolate(&self, values: &[f64], p: Point) -> Result<f64> {
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain { x1: p[0], x2: p[1] });
        }
        let (dx, dy) = self.spacing();
        let fx = ((p[0] - self.domain.x1_min) / dx).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((p[1] - self.domain.x2_min) / dy).clamp(0.0, (self.rows - 1) as f64);
        let i = (fx.floor() as usize).min(self.cols - 2);
        let j = (fy.floor() as usize).min(self.rows - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| values[j * self.cols + i];
        Ok((1.0 - ty) * ((1.0 - tx) * at(i, j) + tx * at(i + 1, j))
            + ty * ((1.0 - tx) * at(i, j + 1) + tx * at(i + 1, j + 1)))
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_neg_slope(&self) -> f64 {
        self.slopes.iter().map(|s| -s).fold(0.0, f64::max)
    }
}

/// Gap profile `h0` of the slider.
///
/// The analytic profiles use a unit modulating factor, so `h0 = |x1|^alpha`
/// and `h0 = |x|^alpha` hold on the whole domain.
#[derive(Debug, Clone, PartialEq)]
pub enum SliderShape {
    LineContact { alpha: f64 },
    PointContact { alpha: f64 },
    Flat,
    Tabulated(Box<HeightTable>),
}

impl SliderShape {
    pub fn line(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(SliderShape::LineContact { alpha })
    }

    pub fn point(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(SliderShape::PointContact { alpha })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SliderShape::LineContact { .. } => "line-contact",
            SliderShape::PointContact { .. } => "point-contact",
            SliderShape::Flat => "flat",
            SliderShape::Tabulated(_) => "tabulated",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            SliderShape::LineContact { alpha } | SliderShape::PointContact { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// True when the x1-slope jumps across the contact set (`alpha == 1`).
    /// The slope there is reported as 0.
    pub fn has_kink(&self) -> bool {
        self.alpha() == Some(1.0)
    }

    pub fn height(&self, p: Point) -> Result<f64> {
        Ok(match self {
            SliderShape::LineContact { alpha } => p[0].abs().powf(*alpha),
            SliderShape::PointContact { alpha } => p[0].hypot(p[1]).powf(*alpha),
            SliderShape::Flat => 0.0,
            SliderShape::Tabulated(t) => t.interpolate(&t.heights, p)?,
        })
    }

    /// `d h0 / d x1` at `p`.
    pub fn slope_x1(&self, p: Point) -> Result<f64> {
        Ok(match self {
            SliderShape::LineContact { alpha } => {
                let x1 = p[0];
                if x1 == 0.0 {
                    0.0
                } else {
                    alpha * x1.abs().powf(alpha - 1.0) * x1.signum()
                }
            }
            SliderShape::PointContact { alpha } => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    0.0
                } else {
                    alpha * r.powf(alpha - 2.0) * p[0]
                }
            }
            SliderShape::Flat => 0.0,
            SliderShape::Tabulated(t) => t.interpolate(&t.slopes, p)?,
        })
    }

    /// `sup |h0|` over the closed domain.
    pub fn max_height(&self, domain: &DomainRect) -> f64 {
        match self {
            SliderShape::LineContact { alpha } => {
                domain.x1_min.abs().max(domain.x1_max).powf(*alpha)
            }
            SliderShape::PointContact { alpha } => domain
                .corners()
                .iter()
                .map(|c| c[0].hypot(c[1]))
                .fold(0.0, f64::max)
                .powf(*alpha),
            SliderShape::Flat => 0.0,
            SliderShape::Tabulated(t) => t.max_height(),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 1.0) {
        return Err(Error::InvalidShape(format!(
            "exponent alpha must be >= 1, got {alpha}"
        )));
    }
    Ok(())
}

pub fn eval_height(shape: &SliderShape, p: Point) -> Result<f64> {
    shape.height(p)
}

pub fn eval_gradient_x1(shape: &SliderShape, p: Point) -> Result<f64> {
    shape.slope_x1(p)
}

/// Largest wedge speed `sup(-d h0/d x1)`, clamped at 0.
///
/// Nodal values are combined with a maximization over the boundary of the
/// rectangle for the analytic profiles, where the supremum is attained.
pub fn compute_v1(shape: &SliderShape, grid: &Grid) -> f64 {
    let nodal = grid
        .nodes()
        .map(|p| -shape.slope_x1(p).unwrap_or(0.0))
        .fold(0.0, f64::max);
    let analytic = match shape {
        SliderShape::LineContact { alpha } => {
            // -dh0/dx1 = alpha (-x1)^(alpha-1) on x1 < 0, increasing in |x1|
            if grid.domain.x1_min < 0.0 {
                alpha * (-grid.domain.x1_min).powf(alpha - 1.0)
            } else {
                0.0
            }
        }
        SliderShape::PointContact { .. } => boundary_sup(shape, &grid.domain),
        SliderShape::Flat => 0.0,
        SliderShape::Tabulated(t) => t.max_neg_slope(),
    };
    nodal.max(analytic).max(0.0)
}

/// For `|x|^alpha` with `alpha >= 1`, `-dh0/dx1 = alpha rho^(alpha-1) (-cos theta)`
/// grows along rays, so its supremum over the rectangle sits on the boundary.
fn boundary_sup(shape: &SliderShape, d: &DomainRect) -> f64 {
    let f = |p: Point| -shape.slope_x1(p).unwrap_or(0.0);
    let corners = d.corners();
    let mut best = corners.iter().map(|&c| f(c)).fold(0.0, f64::max);
    best = best.max(f([d.x1_min, 0.0]));
    const SAMPLES: usize = 4096;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let lerp = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let mut arg = 0;
        let mut val = f64::NEG_INFINITY;
        for s in 0..=SAMPLES {
            let v = f(lerp(s as f64 / SAMPLES as f64));
            if v > val {
                val = v;
                arg = s;
            }
        }
        // golden-section polish on the bracketing sample cell
        let h = 1.0 / SAMPLES as f64;
        let (mut lo, mut hi) = (
            (arg as f64 * h - h).max(0.0),
            (arg as f64 * h + h).min(1.0),
        );
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(lerp(m1)) < f(lerp(m2)) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best = best.max(val).max(f(lerp(0.5 * (lo + hi))));
    }
    best
}

/// Region near the contact set on which the wedge term `-d h0/d x1` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContactBox {
    /// `]x1_lo, x1_hi[ x ]-half_width, half_width[`
    LineBox {
        beta: f64,
        x1_lo: f64,
        x1_hi: f64,
        half_width: f64,
    },
    /// `rho_lo <= rho <= rho_hi`, `|theta - pi| <= half_angle`
    SectorBox {
        beta: f64,
        rho_lo: f64,
        rho_hi: f64,
        half_angle: f64,
    },
}

impl ContactBox {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            ContactBox::LineBox {
                x1_lo,
                x1_hi,
                half_width,
                ..
            } => p[0] > x1_lo && p[0] < x1_hi && p[1].abs() < half_width,
            ContactBox::SectorBox {
                rho_lo,
                rho_hi,
                half_angle,
                ..
            } => {
                let rho = p[0].hypot(p[1]);
                if rho < rho_lo || rho > rho_hi {
                    return false;
                }
                // angle measured from the negative x1 axis
                let off = p[1].atan2(-p[0]).abs();
                off <= half_angle
            }
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            ContactBox::LineBox { beta, .. } | ContactBox::SectorBox { beta, .. } => beta,
        }
    }

    /// Axis-aligned bounding rectangle `(x1_lo, x1_hi, x2_lo, x2_hi)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            ContactBox::LineBox {
                x1_lo,
                x1_hi,
                half_width,
                ..
            } => (x1_lo, x1_hi, -half_width, half_width),
            ContactBox::SectorBox {
                rho_lo,
                rho_hi,
                half_angle,
                ..
            } => {
                let s = rho_hi * half_angle.sin();
                (-rho_hi, -rho_lo * half_angle.cos(), -s, s)
            }
        }
    }
}

/// Builds the box `B_l` (line contact, `aperture` = half width) or sector
/// `B_p` (point contact, `aperture` = half angle) of scale `beta^(1/alpha)`.
pub fn contact_box(
    shape: &SliderShape,
    domain: &DomainRect,
    beta: f64,
    aperture: f64,
) -> Result<ContactBox> {
    if !(beta > 0.0) {
        return Err(Error::NonPositiveClearance(beta));
    }
    let b = match *shape {
        SliderShape::LineContact { alpha } => {
            if !(aperture > 0.0) {
                return Err(Error::param("delta", "must be > 0"));
            }
            let r = beta.powf(1.0 / alpha);
            ContactBox::LineBox {
                beta,
                x1_lo: -2.0 * r,
                x1_hi: -r,
                half_width: aperture,
            }
        }
        SliderShape::PointContact { alpha } => {
            if !(aperture > 0.0 && aperture < 0.5 * PI) {
                return Err(Error::param("theta0", "must lie in ]0, pi/2["));
            }
            let r = beta.powf(1.0 / alpha);
            ContactBox::SectorBox {
                beta,
                rho_lo: r,
                rho_hi: 2.0 * r,
                half_angle: aperture,
            }
        }
        SliderShape::Flat => return Err(Error::UnsupportedShape("flat")),
        SliderShape::Tabulated(_) => return Err(Error::UnsupportedShape("tabulated")),
    };
    let (a, c, lo, hi) = b.bounds();
    if !(a > domain.x1_min && c < domain.x1_max && lo > domain.x2_min && hi < domain.x2_max) {
        return Err(Error::BoxOutsideDomain(format!(
            "box [{a}, {c}] x [{lo}, {hi}] is not strictly inside the domain"
        )));
    }
    Ok(b)
}
