//! Graded interval grids, triangulations of convex polygons and logarithmic
//! radial grids.
//!
//! Polygon meshes start from the fan of the polygon around its centroid and
//! are refined by newest-vertex bisection. Every refinement is nested (old
//! vertices keep their indices and positions), which is what makes discrete
//! minima monotone under refinement.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{HardyError, Result};
use crate::geometry::Domain;

/// Ratio of smallest to largest cell targeted by [`default_grade_ratio`].
pub const DEFAULT_SPAN: f64 = 1e-12;
/// Floor on the automatic grading ratio.
pub const DEFAULT_RATIO: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mesh1D {
    pub nodes: Vec<f64>,
    /// Piece id of the boundary at the first node, `None` for an interior
    /// end such as the centre of a ball.
    pub left_piece: Option<usize>,
    pub right_piece: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub piece: usize,
}

/// Conforming triangulation. Each triangle is stored as
/// `[peak, b, c]` in counter-clockwise order; `(b, c)` is its refinement edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    #[serde(rename = "cells")]
    pub triangles: Vec<[usize; 3]>,
    #[serde(rename = "tags")]
    pub boundary_edges: Vec<BoundaryEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialLogMesh {
    /// Nodes in `s = log(r / radius)`.
    pub s_nodes: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mesh {
    Interval(Mesh1D),
    Triangles(TriMesh),
    RadialLog(RadialLogMesh),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSummary {
    pub kind: String,
    pub nodes: usize,
    pub cells: usize,
    pub h_min: f64,
    pub h_max: f64,
}

impl Mesh {
    pub fn summary(&self) -> MeshSummary {
        match self {
            Mesh::Interval(m) => {
                let (lo, hi) = spacing_range(&m.nodes);
                MeshSummary {
                    kind: "interval".into(),
                    nodes: m.nodes.len(),
                    cells: m.nodes.len() - 1,
                    h_min: lo,
                    h_max: hi,
                }
            }
            Mesh::RadialLog(m) => {
                let (lo, hi) = spacing_range(&m.s_nodes);
                MeshSummary {
                    kind: "radial_log".into(),
                    nodes: m.s_nodes.len(),
                    cells: m.s_nodes.len() - 1,
                    h_min: lo,
                    h_max: hi,
                }
            }
            Mesh::Triangles(m) => {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for t in &m.triangles {
                    for k in 0..3 {
                        let l = m.edge_length(t[k], t[(k + 1) % 3]);
                        lo = lo.min(l);
                        hi = hi.max(l);
                    }
                }
                MeshSummary {
                    kind: "triangles".into(),
                    nodes: m.vertices.len(),
                    cells: m.triangles.len(),
                    h_min: lo,
                    h_max: hi,
                }
            }
        }
    }
}

fn spacing_range(nodes: &[f64]) -> (f64, f64) {
    nodes
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold((f64::INFINITY, 0.0), |(lo, hi), h| (lo.min(h), hi.max(h)))
}

/// Grading ratio for `cells_per_end` geometric cells whose smallest to
/// largest spacing is [`DEFAULT_SPAN`], clamped to `[DEFAULT_RATIO, 1]`.
pub fn default_grade_ratio(cells_per_end: usize) -> f64 {
    if cells_per_end < 2 {
        return 1.0;
    }
    DEFAULT_SPAN
        .powf(1.0 / (cells_per_end - 1) as f64)
        .clamp(DEFAULT_RATIO, 1.0)
}

/// Interval grid with `n` cells. Spacings shrink by `grade_ratio` from one
/// cell to the next when approaching each endpoint listed in `toward`
/// (piece 0 is the left endpoint, piece 1 the right one).
pub fn build_interval_mesh(domain: &Domain, n: usize, grade_ratio: f64, toward: &[usize]) -> Result<Mesh1D> {
    let Domain::Interval { a, b } = *domain else {
        return Err(HardyError::UnsupportedVariant(
            "interval meshes on a non-interval domain",
        ));
    };
    if n < 2 {
        return Err(HardyError::Mesh(format!("need at least 2 cells, got {n}")));
    }
    if !(grade_ratio > 0.0 && grade_ratio <= 1.0) {
        return Err(HardyError::Mesh(format!(
            "grade ratio must lie in (0, 1], got {grade_ratio}"
        )));
    }
    if let Some(bad) = toward.iter().find(|&&p| p > 1) {
        return Err(HardyError::Mesh(format!("interval has no boundary piece {bad}")));
    }
    let left = toward.contains(&0);
    let right = toward.contains(&1);
    // Level j counts cells away from the nearest graded end.
    let level = |k: usize| -> usize {
        match (left, right) {
            (true, true) => k.min(n - 1 - k),
            (true, false) => k,
            (false, true) => n - 1 - k,
            (false, false) => 0,
        }
    };
    let top = (0..n).map(level).max().unwrap_or(0);
    let spacing: Vec<f64> = (0..n).map(|k| grade_ratio.powi((top - level(k)) as i32)).collect();
    let total: f64 = spacing.iter().sum();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(a);
    let mut acc = 0.0;
    for (k, s) in spacing.iter().enumerate() {
        acc += s;
        nodes.push(if k + 1 == n { b } else { a + (b - a) * acc / total });
    }
    let mesh = Mesh1D {
        nodes,
        left_piece: Some(0),
        right_piece: Some(1),
    };
    mesh.check()?;
    Ok(mesh)
}

impl Mesh1D {
    fn check(&self) -> Result<()> {
        if self.nodes.len() < 2 || self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HardyError::Mesh(
                "nodes are not strictly increasing (grading too strong for this cell count)".into(),
            ));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Splits the cell next to each listed endpoint into `added + 1`
    /// geometric sub-cells with ratio `ratio`, shrinking toward the endpoint.
    /// Old nodes are kept, so the result nests the original grid.
    pub fn refine_toward(&self, pieces: &[usize], added: usize, ratio: f64) -> Result<Mesh1D> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(HardyError::Mesh(format!(
                "refinement ratio must lie in (0, 1), got {ratio}"
            )));
        }
        let mut nodes = self.nodes.clone();
        let n = nodes.len();
        if pieces.iter().any(|&p| Some(p) == self.left_piece) {
            let (x0, x1) = (nodes[0], nodes[1]);
            let inner: Vec<f64> = (1..=added)
                .rev()
                .map(|k| x0 + (x1 - x0) * ratio.powi(k as i32))
                .collect();
            nodes.splice(1..1, inner);
        }
        if pieces.iter().any(|&p| Some(p) == self.right_piece) {
            let m = nodes.len();
            let (x0, x1) = (nodes[m - 2], nodes[m - 1]);
            let inner: Vec<f64> = (1..=added).map(|k| x1 - (x1 - x0) * ratio.powi(k as i32)).collect();
            nodes.splice(m - 1..m - 1, inner);
        }
        debug_assert!(nodes.len() >= n);
        let out = Mesh1D {
            nodes,
            left_piece: self.left_piece,
            right_piece: self.right_piece,
        };
        out.check()?;
        Ok(out)
    }

    /// Splits every cell at its midpoint.
    pub fn bisect(&self) -> Mesh1D {
        Mesh1D {
            nodes: bisect_nodes(&self.nodes),
            left_piece: self.left_piece,
            right_piece: self.right_piece,
        }
    }

    /// Piecewise-linear interpolation of nodal `values` at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let k = self.nodes.partition_point(|&x| x <= t).clamp(1, self.nodes.len() - 1);
        let (x0, x1) = (self.nodes[k - 1], self.nodes[k]);
        let s = ((t - x0) / (x1 - x0)).clamp(0.0, 1.0);
        values[k - 1] * (1.0 - s) + values[k] * s
    }
}

fn bisect_nodes(nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * nodes.len() - 1);
    for w in nodes.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(nodes[nodes.len() - 1]);
    out
}

/// Triangulates a convex polygon with target edge length `h`, then refines
/// to `h / 4` within `grade_depth` of the pieces in `grade_near`.
pub fn build_polygon_mesh(domain: &Domain, h: f64, grade_near: &[usize], grade_depth: f64) -> Result<TriMesh> {
    let Domain::ConvexPolygon { vertices } = domain else {
        return Err(HardyError::UnsupportedVariant("polygon meshes on a non-polygon domain"));
    };
    domain.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(HardyError::Mesh(format!(
            "target edge length must be positive, got {h}"
        )));
    }
    if let Some(bad) = grade_near.iter().find(|&&p| p >= vertices.len()) {
        return Err(HardyError::Mesh(format!("polygon has no boundary piece {bad}")));
    }
    let m = vertices.len();
    let centroid = polygon_centroid(vertices);
    let mut verts = vertices.clone();
    verts.push(centroid);
    let triangles = (0..m).map(|i| [m, i, (i + 1) % m]).collect();
    let boundary_edges = (0..m)
        .map(|i| BoundaryEdge {
            nodes: [i, (i + 1) % m],
            piece: i,
        })
        .collect();
    let mut mesh = TriMesh {
        vertices: verts,
        triangles,
        boundary_edges,
    };
    if mesh.triangles.iter().any(|t| mesh.area(t) <= 0.0) {
        return Err(HardyError::Mesh("degenerate polygon".into()));
    }
    loop {
        let marked: Vec<bool> = mesh.triangles.iter().map(|t| mesh.longest_edge(t) > h).collect();
        if !marked.contains(&true) {
            break;
        }
        mesh.bisect(&marked);
    }
    if !grade_near.is_empty() && grade_depth > 0.0 {
        let fine = 0.25 * h;
        let segs: Vec<([f64; 2], [f64; 2])> = grade_near
            .iter()
            .map(|&p| (vertices[p], vertices[(p + 1) % m]))
            .collect();
        loop {
            let marked: Vec<bool> = mesh
                .triangles
                .iter()
                .map(|t| {
                    mesh.longest_edge(t) > fine
                        && t.iter().any(|&v| {
                            segs.iter()
                                .any(|&(a, b)| point_segment_distance(mesh.vertices[v], a, b) < grade_depth)
                        })
                })
                .collect();
            if !marked.contains(&true) {
                break;
            }
            mesh.bisect(&marked);
        }
    }
    Ok(mesh)
}

fn polygon_centroid(v: &[[f64; 2]]) -> [f64; 2] {
    let m = v.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..m {
        let (p, q) = (v[i], v[(i + 1) % m]);
        let cr = p[0] * q[1] - q[0] * p[1];
        a += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    [cx / (3.0 * a), cy / (3.0 * a)]
}

fn point_segment_distance(x: [f64; 2], p: [f64; 2], q: [f64; 2]) -> f64 {
    let e = [q[0] - p[0], q[1] - p[1]];
    let t = (((x[0] - p[0]) * e[0] + (x[1] - p[1]) * e[1]) / (e[0] * e[0] + e[1] * e[1])).clamp(0.0, 1.0);
    (x[0] - p[0] - t * e[0]).hypot(x[1] - p[1] - t * e[1])
}

impl TriMesh {
    pub fn area(&self, t: &[usize; 3]) -> f64 {
        let [a, b, c] = t.map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| self.area(t)).sum()
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges
            .iter()
            .map(|e| self.edge_length(e.nodes[0], e.nodes[1]))
            .sum()
    }

    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.vertices[i], self.vertices[j]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    fn longest_edge(&self, t: &[usize; 3]) -> f64 {
        (0..3)
            .map(|k| self.edge_length(t[k], t[(k + 1) % 3]))
            .fold(0.0, f64::max)
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let o = self.vertices[t[k]];
                let p = self.vertices[t[(k + 1) % 3]];
                let q = self.vertices[t[(k + 2) % 3]];
                let u = [p[0] - o[0], p[1] - o[1]];
                let v = [q[0] - o[0], q[1] - o[1]];
                let ang = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]).abs();
                best = best.min(ang.to_degrees());
            }
        }
        best
    }

    /// Uniform refinement: every triangle is bisected once.
    pub fn refine_uniform(&mut self) -> Vec<[usize; 2]> {
        let marked = vec![true; self.triangles.len()];
        self.bisect(&marked)
    }

    /// Newest-vertex bisection of the marked triangles plus the closure
    /// needed for conformity. Returns the parent edge of each new vertex, in
    /// the order the vertices were appended.
    pub fn bisect(&mut self, marked: &[bool]) -> Vec<[usize; 2]> {
        let key = |a: usize, b: usize| (a.min(b), a.max(b));
        let mut flagged: HashMap<(usize, usize), bool> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                flagged.entry(key(t[k], t[(k + 1) % 3])).or_insert(false);
            }
        }
        for (t, &m) in self.triangles.iter().zip(marked) {
            if m {
                flagged.insert(key(t[1], t[2]), true);
            }
        }
        loop {
            let mut changed = false;
            for t in &self.triangles {
                let refine_edge = key(t[1], t[2]);
                if flagged[&refine_edge] {
                    continue;
                }
                if flagged[&key(t[0], t[1])] || flagged[&key(t[2], t[0])] {
                    flagged.insert(refine_edge, true);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut parents = Vec::new();
        for t in &self.triangles {
            for (a, b) in [(t[1], t[2]), (t[0], t[1]), (t[2], t[0])] {
                let e = key(a, b);
                if flagged[&e] && !midpoint.contains_key(&e) {
                    let (p, q) = (self.vertices[e.0], self.vertices[e.1]);
                    midpoint.insert(e, self.vertices.len());
                    self.vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    parents.push([e.0, e.1]);
                }
            }
        }
        let mut out = Vec::with_capacity(self.triangles.len() * 2);
        for &t in &self.triangles {
            let mut stack = vec![t];
            while let Some([a, b, c]) = stack.pop() {
                match midpoint.get(&key(b, c)) {
                    Some(&m) => {
                        stack.push([m, c, a]);
                        stack.push([m, a, b]);
                    }
                    None => out.push([a, b, c]),
                }
            }
        }
        self.triangles = out;
        let mut edges = Vec::with_capacity(self.boundary_edges.len());
        for e in &self.boundary_edges {
            match midpoint.get(&key(e.nodes[0], e.nodes[1])) {
                Some(&m) => {
                    edges.push(BoundaryEdge {
                        nodes: [e.nodes[0], m],
                        piece: e.piece,
                    });
                    edges.push(BoundaryEdge {
                        nodes: [m, e.nodes[1]],
                        piece: e.piece,
                    });
                }
                None => edges.push(*e),
            }
        }
        self.boundary_edges = edges;
        parents
    }

    /// True if every interior edge is shared by exactly two triangles with
    /// opposite orientation and every boundary edge by exactly one.
    pub fn is_conforming(&self) -> bool {
        let mut uses: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *uses.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let boundary: HashMap<(usize, usize), ()> = self
            .boundary_edges
            .iter()
            .flat_map(|e| [((e.nodes[0], e.nodes[1]), ()), ((e.nodes[1], e.nodes[0]), ())])
            .collect();
        uses.iter().all(|(&(a, b), &n)| {
            let twin = uses.get(&(b, a)).copied().unwrap_or(0);
            n == 1 && (twin == 1 || boundary.contains_key(&(a, b)))
        }) && self
            .boundary_edges
            .iter()
            .all(|e| uses.get(&(e.nodes[0], e.nodes[1])) == Some(&1))
    }
}

/// Uniform radial grid: `s = log(r / R)` on `[0, log(truncation / R)]` for
/// an exterior ball, or `r` on `[0, R]` for a ball.
pub fn build_radial_mesh(domain: &Domain, n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(HardyError::Mesh(format!("need at least 2 cells, got {n}")));
    }
    match *domain {
        Domain::ExteriorBall { radius, truncation, .. } => {
            let span = (truncation / radius).ln();
            let s_nodes = (0..=n).map(|k| span * k as f64 / n as f64).collect();
            Ok(Mesh::RadialLog(RadialLogMesh { s_nodes, radius }))
        }
        Domain::Ball { radius, .. } => {
            let nodes = (0..=n).map(|k| radius * k as f64 / n as f64).collect();
            Ok(Mesh::Interval(Mesh1D {
                nodes,
                left_piece: None,
                right_piece: Some(0),
            }))
        }
        _ => Err(HardyError::UnsupportedVariant("radial meshes on a non-radial domain")),
    }
}

impl RadialLogMesh {
    pub fn from_nodes(s_nodes: Vec<f64>, radius: f64) -> Result<Self> {
        if s_nodes.len() < 3 || s_nodes[0] != 0.0 || s_nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HardyError::Mesh(
                "radial nodes must start at 0 and increase strictly (>= 2 cells)".into(),
            ));
        }
        Ok(Self { s_nodes, radius })
    }

    pub fn bisect(&self) -> RadialLogMesh {
        RadialLogMesh {
            s_nodes: bisect_nodes(&self.s_nodes),
            radius: self.radius,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        self.s_nodes.iter().map(|s| self.radius * s.exp()).collect()
    }
}
