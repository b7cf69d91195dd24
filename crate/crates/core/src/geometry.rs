//! Admissible domains, the distance to the boundary and the nearest-point
//! projection.
//!
//! Boundary pieces are numbered per variant:
//!
//! * `Interval { a, b }`: piece 0 is the endpoint `a`, piece 1 is `b`.
//! * `ConvexPolygon`: piece `i` is the edge from vertex `i` to vertex `i + 1`.
//! * `Ball` and `ExteriorBall`: piece 0 is the sphere of radius `radius`.
//!   The truncation sphere of an exterior ball is a numerical artefact and
//!   is not part of the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};

/// Multiplicity reported when a whole continuum of boundary points is
/// nearest (the centre of a ball in dimension two and higher).
pub const CONTINUUM: usize = usize::MAX;

/// Default additive tolerance used to detect ties on the singular set.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    ConvexPolygon { vertices: Vec<[f64; 2]> },
    Ball { dim: usize, radius: f64 },
    ExteriorBall { dim: usize, radius: f64, truncation: f64 },
}

/// Nearest boundary point of an interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub piece: usize,
    pub multiplicity: usize,
    pub distance: f64,
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let d = Domain::Interval { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let d = Domain::ConvexPolygon { vertices };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_square() -> Self {
        Domain::ConvexPolygon {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let d = Domain::Ball { dim, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn exterior_ball(dim: usize, radius: f64, truncation: f64) -> Result<Self> {
        let d = Domain::ExteriorBall {
            dim,
            radius,
            truncation,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return Err(HardyError::InvalidDomain(format!(
                        "interval requires finite a < b, got [{a}, {b}]"
                    )));
                }
            }
            Domain::ConvexPolygon { vertices } => {
                let m = vertices.len();
                if m < 3 {
                    return Err(HardyError::InvalidDomain(format!(
                        "polygon needs at least 3 vertices, got {m}"
                    )));
                }
                if vertices.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(HardyError::InvalidDomain("non-finite vertex".into()));
                }
                for i in 0..m {
                    let p0 = vertices[i];
                    let p1 = vertices[(i + 1) % m];
                    let p2 = vertices[(i + 2) % m];
                    let e0 = [p1[0] - p0[0], p1[1] - p0[1]];
                    let e1 = [p2[0] - p1[0], p2[1] - p1[1]];
                    let cross = e0[0] * e1[1] - e0[1] * e1[0];
                    let scale = norm2(e0) * norm2(e1);
                    if !(cross > 1e-14 * scale) {
                        return Err(HardyError::InvalidDomain(format!(
                            "polygon is not strictly convex and counter-clockwise at vertex {}",
                            (i + 1) % m
                        )));
                    }
                }
                // A strictly left-turning closed chain that winds more than
                // once is a star polygon, not a convex one.
                let mut turning = 0.0;
                for i in 0..m {
                    let p0 = vertices[i];
                    let p1 = vertices[(i + 1) % m];
                    let p2 = vertices[(i + 2) % m];
                    let a0 = (p1[1] - p0[1]).atan2(p1[0] - p0[0]);
                    let a1 = (p2[1] - p1[1]).atan2(p2[0] - p1[0]);
                    let mut d = a1 - a0;
                    while d <= 0.0 {
                        d += 2.0 * std::f64::consts::PI;
                    }
                    turning += d;
                }
                if (turning - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
                    return Err(HardyError::InvalidDomain("polygon winds more than once".into()));
                }
            }
            Domain::Ball { dim, radius } => {
                if *dim < 1 || !(radius.is_finite() && *radius > 0.0) {
                    return Err(HardyError::InvalidDomain(format!(
                        "ball requires dim >= 1 and radius > 0, got dim={dim}, radius={radius}"
                    )));
                }
            }
            Domain::ExteriorBall {
                dim,
                radius,
                truncation,
            } => {
                if *dim < 1
                    || !(radius.is_finite() && *radius > 0.0)
                    || !(truncation.is_finite() && truncation > radius)
                {
                    return Err(HardyError::InvalidDomain(format!(
                        "exterior ball requires dim >= 1 and truncation > radius > 0, got dim={dim}, radius={radius}, truncation={truncation}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::ConvexPolygon { .. } => 2,
            Domain::Ball { dim, .. } | Domain::ExteriorBall { dim, .. } => *dim,
        }
    }

    pub fn num_pieces(&self) -> usize {
        match self {
            Domain::Interval { .. } => 2,
            Domain::ConvexPolygon { vertices } => vertices.len(),
            Domain::Ball { .. } | Domain::ExteriorBall { .. } => 1,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, Domain::ExteriorBall { .. })
    }

    /// Surface measure of one boundary piece. Endpoints of an interval carry
    /// counting measure.
    pub fn piece_measure(&self, piece: usize) -> Result<f64> {
        if piece >= self.num_pieces() {
            return Err(HardyError::Partition(format!("no boundary piece {piece}")));
        }
        Ok(match self {
            Domain::Interval { .. } => 1.0,
            Domain::ConvexPolygon { vertices } => {
                let m = vertices.len();
                let (p, q) = (vertices[piece], vertices[(piece + 1) % m]);
                norm2([q[0] - p[0], q[1] - p[1]])
            }
            Domain::Ball { dim, radius } | Domain::ExteriorBall { dim, radius, .. } => {
                sphere_area(*dim) * radius.powi(*dim as i32 - 1)
            }
        })
    }

    pub fn boundary_measure(&self) -> f64 {
        (0..self.num_pieces())
            .map(|i| self.piece_measure(i).unwrap_or(0.0))
            .sum()
    }

    fn scale(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => (b - a).max(a.abs()).max(b.abs()).max(1.0),
            Domain::ConvexPolygon { vertices } => vertices
                .iter()
                .flat_map(|v| v.iter().map(|c| c.abs()))
                .fold(1.0, f64::max),
            Domain::Ball { radius, .. } => radius.max(1.0),
            Domain::ExteriorBall { truncation, .. } => truncation.max(1.0),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() || x.iter().any(|c| !c.is_finite()) {
            return Err(HardyError::OutsideDomain(x.to_vec()));
        }
        let slack = 1e-12 * self.scale();
        let inside = match self {
            Domain::Interval { a, b } => x[0] >= a - slack && x[0] <= b + slack,
            Domain::ConvexPolygon { vertices } => {
                let m = vertices.len();
                (0..m).all(|i| halfplane_distance(vertices[i], vertices[(i + 1) % m], x) >= -slack)
            }
            Domain::Ball { radius, .. } => norm(x) <= radius + slack,
            Domain::ExteriorBall { radius, .. } => norm(x) >= radius - slack,
        };
        if inside {
            Ok(())
        } else {
            Err(HardyError::OutsideDomain(x.to_vec()))
        }
    }

    /// Distance from `x` to the boundary, in closed form.
    pub fn distance_to_boundary(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.distance_unchecked(x))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64]) -> f64 {
        let d = match self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::ConvexPolygon { vertices } => {
                let m = vertices.len();
                (0..m)
                    .map(|i| segment_closest(vertices[i], vertices[(i + 1) % m], x).1)
                    .fold(f64::INFINITY, f64::min)
            }
            Domain::Ball { radius, .. } => radius - norm(x),
            Domain::ExteriorBall { radius, .. } => norm(x) - radius,
        };
        d.max(0.0)
    }

    /// Nearest boundary point. On the singular set the point on the lowest
    /// piece id wins, ties within a piece go to the lexicographically
    /// smallest point, and the multiplicity reports how many points tie.
    pub fn boundary_projection(&self, x: &[f64]) -> Result<Projection> {
        self.check_point(x)?;
        Ok(self.projection_with_tol(x, TIE_TOL * self.scale()))
    }

    /// Number of boundary points within `tol` of the minimal distance.
    pub fn nearest_count(&self, x: &[f64], tol: f64) -> Result<usize> {
        if !(tol > 0.0) {
            return Err(HardyError::Parameter(format!("tolerance must be positive, got {tol}")));
        }
        self.check_point(x)?;
        Ok(self.projection_with_tol(x, tol).multiplicity)
    }

    pub(crate) fn projection_with_tol(&self, x: &[f64], tol: f64) -> Projection {
        match self {
            Domain::Interval { a, b } => {
                let cands = [(0usize, vec![*a], x[0] - a), (1, vec![*b], b - x[0])];
                pick_nearest(cands.into_iter().collect(), tol)
            }
            Domain::ConvexPolygon { vertices } => {
                let m = vertices.len();
                let cands = (0..m)
                    .map(|i| {
                        let (pt, d) = segment_closest(vertices[i], vertices[(i + 1) % m], x);
                        (i, pt.to_vec(), d)
                    })
                    .collect();
                pick_nearest(cands, tol)
            }
            Domain::Ball { dim, radius } => {
                let r = norm(x);
                if r <= tol {
                    let mut point = vec![0.0; *dim];
                    point[0] = -radius;
                    let multiplicity = if *dim == 1 { 2 } else { CONTINUUM };
                    return Projection {
                        point,
                        piece: 0,
                        multiplicity,
                        distance: radius - r,
                    };
                }
                Projection {
                    point: x.iter().map(|c| c * radius / r).collect(),
                    piece: 0,
                    multiplicity: 1,
                    distance: (radius - r).max(0.0),
                }
            }
            Domain::ExteriorBall { radius, .. } => {
                let r = norm(x);
                Projection {
                    point: x.iter().map(|c| c * radius / r).collect(),
                    piece: 0,
                    multiplicity: 1,
                    distance: (r - radius).max(0.0),
                }
            }
        }
    }

    /// Radius of the largest inscribed ball.
    pub fn inradius(&self) -> Result<f64> {
        match self {
            Domain::Interval { a, b } => Ok(0.5 * (b - a)),
            Domain::Ball { radius, .. } => Ok(*radius),
            Domain::ConvexPolygon { vertices } => Ok(polygon_inradius(vertices).1),
            Domain::ExteriorBall { .. } => Err(HardyError::UnsupportedVariant(
                "the exterior of a ball (the in-radius is infinite)",
            )),
        }
    }

    /// Centre of a largest inscribed ball.
    pub fn incenter(&self) -> Result<Vec<f64>> {
        match self {
            Domain::Interval { a, b } => Ok(vec![0.5 * (a + b)]),
            Domain::Ball { dim, .. } => Ok(vec![0.0; *dim]),
            Domain::ConvexPolygon { vertices } => Ok(polygon_inradius(vertices).0.to_vec()),
            Domain::ExteriorBall { .. } => Err(HardyError::UnsupportedVariant(
                "the exterior of a ball (the in-radius is infinite)",
            )),
        }
    }
}

fn pick_nearest(mut cands: Vec<(usize, Vec<f64>, f64)>, tol: f64) -> Projection {
    let best = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    cands.retain(|c| c.2 <= best + tol);
    cands.sort_by(|l, r| {
        l.0.cmp(&r.0).then_with(|| {
            l.1.iter()
                .zip(&r.1)
                .map(|(a, b)| a.total_cmp(b))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    // Adjacent edges both report a shared vertex; count it once.
    let mut unique: Vec<&Vec<f64>> = Vec::new();
    for c in &cands {
        if !unique.iter().any(|u| dist(u, &c.1) <= tol) {
            unique.push(&c.1);
        }
    }
    let first = &cands[0];
    Projection {
        point: first.1.clone(),
        piece: first.0,
        multiplicity: unique.len(),
        distance: best.max(0.0),
    }
}

/// Signed distance of `x` to the line through `p -> q`, positive on the
/// left (interior side for a counter-clockwise polygon).
pub fn halfplane_distance(p: [f64; 2], q: [f64; 2], x: &[f64]) -> f64 {
    let e = [q[0] - p[0], q[1] - p[1]];
    let len = norm2(e);
    (e[0] * (x[1] - p[1]) - e[1] * (x[0] - p[0])) / len
}

fn segment_closest(p: [f64; 2], q: [f64; 2], x: &[f64]) -> ([f64; 2], f64) {
    let e = [q[0] - p[0], q[1] - p[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = (((x[0] - p[0]) * e[0] + (x[1] - p[1]) * e[1]) / len2).clamp(0.0, 1.0);
    let c = [p[0] + t * e[0], p[1] + t * e[1]];
    (c, norm2([x[0] - c[0], x[1] - c[1]]))
}

/// Largest inscribed circle: maximise `r` subject to
/// `halfplane_distance_i(x) >= r`. The optimum of this three-variable linear
/// program sits on a vertex, i.e. a point equidistant from three edge lines,
/// so the vertices are enumerated.
fn polygon_inradius(vertices: &[[f64; 2]]) -> ([f64; 2], f64) {
    let m = vertices.len();
    let lines: Vec<([f64; 2], f64)> = (0..m)
        .map(|i| {
            let p = vertices[i];
            let q = vertices[(i + 1) % m];
            let e = [q[0] - p[0], q[1] - p[1]];
            let len = norm2(e);
            let n = [-e[1] / len, e[0] / len];
            (n, n[0] * p[0] + n[1] * p[1])
        })
        .collect();
    let scale = vertices
        .iter()
        .flat_map(|v| v.iter().map(|c| c.abs()))
        .fold(1.0, f64::max);
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                // n . x - r = c for the three active lines.
                let rows = [lines[i], lines[j], lines[k]];
                let a = |r: usize| [rows[r].0[0], rows[r].0[1], -1.0];
                let mat = [a(0), a(1), a(2)];
                let rhs = [rows[0].1, rows[1].1, rows[2].1];
                let Some(sol) = solve3(mat, rhs) else { continue };
                let (x, r) = ([sol[0], sol[1]], sol[2]);
                let feasible = lines
                    .iter()
                    .all(|(n, c)| n[0] * x[0] + n[1] * x[1] - c >= r - 1e-10 * scale);
                if feasible && r > best.1 {
                    best = (x, r);
                }
            }
        }
    }
    best
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Surface area of the unit sphere in `R^dim` (2 for `dim = 1`).
pub fn sphere_area(dim: usize) -> f64 {
    let mut area = if dim % 2 == 1 { 2.0 } else { 2.0 * std::f64::consts::PI };
    let mut k = if dim % 2 == 1 { 1 } else { 2 };
    while k < dim {
        area *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    area
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn norm2(e: [f64; 2]) -> f64 {
    e[0].hypot(e[1])
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
