//! Planar geometric primitives: distances, centroids, ordinary least
//! squares line fits, and circle-circle overlap areas.
//!
//! Coordinates are metres east/north on a flat plane. Spherical or
//! projected coordinates are out of scope; at the few-hundred-metre scales
//! involved the flat-plane error is negligible.

use core::f64::consts::PI;
use core::fmt;

use crate::math;

/// Absolute tolerance (metres) on the centre distance when selecting the
/// containment/disjoint branches of the overlap computation. Keeps the
/// `acos` arguments comfortably inside [-1, 1] near the branch boundaries.
const BRANCH_TOL: f64 = 1e-9;

/// A point in the plane, metres east (`x`) and north (`y`).
///
/// Coordinates are expected to be finite; scenario construction enforces
/// this upstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Point2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A circle with positive radius, metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2D,
    pub radius: f64,
}

impl Circle {
    pub const fn new(center: Point2D, radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn area(self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Errors from geometric operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryError {
    /// A centroid was requested for an empty point set.
    EmptyPointSet,
    /// A line fit was requested for fewer than two points.
    InsufficientPoints { got: usize },
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::EmptyPointSet => write!(f, "empty point set"),
            GeometryError::InsufficientPoints { got } => {
                write!(f, "line fit needs at least 2 points, got {got}")
            }
        }
    }
}

impl core::error::Error for GeometryError {}

/// The line produced by [`ols_fit`].
///
/// Vertical lines (all x equal) are represented explicitly instead of via an
/// infinite slope, so the degenerate case stays testable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineKind {
    Sloped { slope: f64, intercept: f64 },
    Vertical { x0: f64 },
}

/// A fitted line plus the centroid of the fitted points.
///
/// The centroid always lies on the represented line: the sloped intercept is
/// computed as `centroid.y - slope * centroid.x`, and the vertical `x0` is
/// the centroid's x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub kind: LineKind,
    pub centroid: Point2D,
}

impl LineFit {
    /// Perpendicular distance from `p` to the fitted line.
    pub fn distance_to(&self, p: Point2D) -> f64 {
        match self.kind {
            LineKind::Sloped { slope, intercept } => {
                math::abs(slope * p.x - p.y + intercept) / math::sqrt(slope * slope + 1.0)
            }
            LineKind::Vertical { x0 } => math::abs(p.x - x0),
        }
    }

    /// Coefficient of determination of the fit over `points` (residuals in
    /// y). Returns 1.0 when the y values are all equal and the fit is exact;
    /// only meaningful for sloped fits.
    pub fn r_squared(&self, points: &[Point2D]) -> f64 {
        let LineKind::Sloped { slope, intercept } = self.kind else {
            return f64::NAN;
        };
        let mean_y = self.centroid.y;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for p in points {
            let r = p.y - (slope * p.x + intercept);
            let t = p.y - mean_y;
            ss_res += r * r;
            ss_tot += t * t;
        }
        if ss_tot == 0.0 {
            if ss_res == 0.0 {
                1.0
            } else {
                f64::NAN
            }
        } else {
            1.0 - ss_res / ss_tot
        }
    }
}

/// Euclidean distance between two points, metres.
pub fn distance(a: Point2D, b: Point2D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    math::sqrt(dx * dx + dy * dy)
}

/// Component-wise arithmetic mean of a nonempty point set.
pub fn centroid(points: &[Point2D]) -> Result<Point2D, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyPointSet);
    }
    let mut sx = 0.0;
    let mut sy = 0.0;
    for p in points {
        sx += p.x;
        sy += p.y;
    }
    let n = points.len() as f64;
    Ok(Point2D::new(sx / n, sy / n))
}

/// Ordinary least squares fit of y on x over at least two points.
///
/// The slope is `sum((x - mx)(y - my)) / sum((x - mx)^2)` over the centred
/// coordinates; when all x values are equal the fit degenerates to a
/// vertical line through the centroid.
pub fn ols_fit(points: &[Point2D]) -> Result<LineFit, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::InsufficientPoints { got: points.len() });
    }
    let c = centroid(points).expect("nonempty");
    let all_x_equal = points.iter().all(|p| p.x == points[0].x);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    let kind = if all_x_equal || sxx == 0.0 {
        LineKind::Vertical { x0: c.x }
    } else {
        let slope = sxy / sxx;
        LineKind::Sloped {
            slope,
            intercept: c.y - slope * c.x,
        }
    };
    Ok(LineFit { kind, centroid: c })
}

/// Area of the intersection of two circles (the lens), square metres.
///
/// Disjoint circles give 0, containment gives the smaller circle's area, and
/// the partial-overlap case is the standard two-circular-segment formula.
pub fn circle_overlap_area(c1: Circle, c2: Circle) -> f64 {
    let d = distance(c1.center, c2.center);
    let (r1, r2) = (c1.radius, c2.radius);
    if d >= r1 + r2 - BRANCH_TOL {
        return 0.0;
    }
    if d <= math::abs(r1 - r2) + BRANCH_TOL {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let cos1 = clamp_unit((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1));
    let cos2 = clamp_unit((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2));
    let seg1 = r1 * r1 * math::acos(cos1);
    let seg2 = r2 * r2 * math::acos(cos2);
    // Heron-style term for the kite spanned by the two centres and the two
    // intersection points.
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    seg1 + seg2 - 0.5 * math::sqrt(k.max(0.0))
}

/// Fraction of the interest circle covered by the serving circle, in [0, 1].
pub fn overlap_fraction(interest: Circle, serving: Circle) -> f64 {
    (circle_overlap_area(interest, serving) / interest.area()).clamp(0.0, 1.0)
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}
