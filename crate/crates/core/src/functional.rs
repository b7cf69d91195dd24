//! The Robin p-Dirichlet functional, the weighted norm and the Rayleigh
//! quotient of piecewise-linear fields.
//!
//! Every mesh kind is flattened into a [`Discretization`]: cells with a
//! constant gradient and a gradient measure, quadrature points for the
//! weighted norm, and Robin boundary entities. Radial problems fold the
//! Jacobian into these measures, so all integrals share one code path.
//!
//! * interval: gradient `d/dt`, measure `h`;
//! * polygon: P1 gradient, measure = area, degree-5 rule for the norm;
//! * ball (radial on `[0, R]`): gradient `d/dr`, measure `|S| r^(n-1) dr`;
//! * exterior ball (in `s = log(r / R)`): gradient `d/ds`, measure
//!   `|S| r^(n-p) ds`, norm points carry `dx = |S| r^n ds` with weight
//!   `r^(-p)`. For `p > n` the last node is free and the field is continued
//!   by a constant beyond the truncation radius; that tail enters the norm as
//!   a point mass. Otherwise the last node is pinned to zero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::geometry::{sphere_area, Domain};
use crate::mesh::Mesh;
use crate::quadrature::{GAUSS5, TRIANGLE7};
use crate::weights::{check_exponent, BoundaryPartition, Condition, HardyWeight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// One left-to-right sum; bitwise reproducible.
    #[default]
    Sequential,
    /// Fixed-size chunks summed in parallel, partial sums combined in order.
    Parallel,
}

const CHUNK: usize = 2048;

#[derive(Debug, Clone)]
pub struct Cell {
    pub nodes: [usize; 3],
    pub len: usize,
    /// Gradient of each nodal basis function (unused components are 0).
    pub grad: [[f64; 2]; 3],
    pub measure: f64,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub nodes: [usize; 3],
    pub shape: [f64; 3],
    pub dx: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RobinEntity {
    pub piece: usize,
    pub sigma: f64,
    pub nodes: [usize; 2],
    /// `(shape values, quadrature weight including the surface measure)`.
    pub points: Vec<([f64; 2], f64)>,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub dim: usize,
    pub node_positions: Vec<Vec<f64>>,
    pub pinned: Vec<bool>,
    pub cells: Vec<Cell>,
    pub quad: Vec<QuadPoint>,
    pub robin: Vec<RobinEntity>,
    pub reduction: Reduction,
}

/// Nodal values of a piecewise-linear trial function. Pinned nodes hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(disc: &Discretization, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != disc.num_nodes() {
            return Err(HardyError::NonMatchingMesh);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HardyError::Parameter("field values must be finite".into()));
        }
        for (v, &pin) in values.iter_mut().zip(&disc.pinned) {
            if pin {
                *v = 0.0;
            }
        }
        Ok(Self { values })
    }

    pub fn from_fn(disc: &Discretization, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = disc.node_positions.iter().map(|x| f(x)).collect();
        Self::new(disc, values)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn dot(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Discretization {
    pub fn new(domain: &Domain, mesh: &Mesh, partition: &BoundaryPartition, p: f64) -> Result<Self> {
        check_exponent(p)?;
        domain.validate()?;
        if partition.len() != domain.num_pieces() {
            return Err(HardyError::Partition("partition does not match domain".into()));
        }
        let disc = match (domain, mesh) {
            (Domain::Interval { a, b }, Mesh::Interval(m)) => {
                check_ends(&m.nodes, *a, *b)?;
                if m.left_piece != Some(0) || m.right_piece != Some(1) {
                    return Err(HardyError::Mesh("interval mesh must tag both endpoints".into()));
                }
                line_discretization(&m.nodes, partition, LineKind::Interval)
            }
            (Domain::Ball { dim, radius }, Mesh::Interval(m)) => {
                check_ends(&m.nodes, 0.0, *radius)?;
                line_discretization(&m.nodes, partition, LineKind::Ball { dim: *dim })
            }
            (
                Domain::ExteriorBall {
                    dim,
                    radius,
                    truncation,
                },
                Mesh::RadialLog(m),
            ) => {
                let span = (truncation / radius).ln();
                let last = *m.s_nodes.last().unwrap_or(&0.0);
                if (m.radius - radius).abs() > 1e-12 * radius || (last - span).abs() > 1e-9 * span.max(1.0) {
                    return Err(HardyError::Mesh(
                        "radial mesh does not span the truncated exterior".into(),
                    ));
                }
                line_discretization(
                    &m.s_nodes,
                    partition,
                    LineKind::Exterior {
                        dim: *dim,
                        radius: *radius,
                        p,
                    },
                )
            }
            (Domain::ConvexPolygon { .. }, Mesh::Triangles(t)) => {
                if !t.triangles.iter().all(|tri| t.area(tri) > 0.0) {
                    return Err(HardyError::Mesh("triangle with non-positive area".into()));
                }
                triangle_discretization(t, partition)
            }
            _ => return Err(HardyError::Mesh("mesh kind does not match the domain".into())),
        };
        Ok(disc)
    }

    pub fn num_nodes(&self) -> usize {
        self.node_positions.len()
    }

    pub fn free_nodes(&self) -> usize {
        self.pinned.iter().filter(|p| !**p).count()
    }

    pub fn quad_positions(&self) -> Vec<Vec<f64>> {
        self.quad.iter().map(|q| q.x.clone()).collect()
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub(crate) fn sum<T: Sync>(&self, items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
        match self.reduction {
            Reduction::Sequential => items.iter().map(&f).sum(),
            Reduction::Parallel => items
                .par_chunks(CHUNK)
                .map(|c| c.iter().map(&f).sum::<f64>())
                .collect::<Vec<_>>()
                .into_iter()
                .sum(),
        }
    }

    pub(crate) fn cell_gradient(&self, cell: &Cell, u: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for k in 0..cell.len {
            let v = u[cell.nodes[k]];
            g[0] += cell.grad[k][0] * v;
            g[1] += cell.grad[k][1] * v;
        }
        g
    }

    fn check(&self, field: &Field) -> Result<()> {
        if field.values.len() != self.num_nodes() {
            return Err(HardyError::NonMatchingMesh);
        }
        Ok(())
    }

    fn check_weight(&self, weight: &HardyWeight) -> Result<()> {
        if weight.len() != self.quad.len() {
            return Err(HardyError::NonMatchingMesh);
        }
        Ok(())
    }
}

fn check_ends(nodes: &[f64], a: f64, b: f64) -> Result<()> {
    let tol = 1e-12 * (b - a).abs().max(1.0);
    if nodes.len() < 2
        || (nodes[0] - a).abs() > tol
        || (nodes[nodes.len() - 1] - b).abs() > tol
        || nodes.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(HardyError::Mesh(format!(
            "mesh nodes must increase strictly from {a} to {b}"
        )));
    }
    Ok(())
}

enum LineKind {
    Interval,
    Ball { dim: usize },
    Exterior { dim: usize, radius: f64, p: f64 },
}

fn line_discretization(nodes: &[f64], partition: &BoundaryPartition, kind: LineKind) -> Discretization {
    let n = nodes.len();
    let dim = match kind {
        LineKind::Interval => 1,
        LineKind::Ball { dim } | LineKind::Exterior { dim, .. } => dim,
    };
    let omega = match kind {
        LineKind::Interval => 1.0,
        _ => sphere_area(dim),
    };
    // physical position of a line coordinate
    let embed = |c: f64| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        x[0] = match kind {
            LineKind::Exterior { radius, .. } => radius * c.exp(),
            _ => c,
        };
        x
    };
    // Jacobians for the gradient energy and for the weighted norm
    let grad_jac = |c: f64| -> f64 {
        match kind {
            LineKind::Interval => 1.0,
            LineKind::Ball { dim } => omega * c.powi(dim as i32 - 1),
            LineKind::Exterior { dim, radius, p } => omega * (radius * c.exp()).powf(dim as f64 - p),
        }
    };
    let norm_jac = |c: f64| -> f64 {
        match kind {
            LineKind::Interval => 1.0,
            LineKind::Ball { dim } => omega * c.powi(dim as i32 - 1),
            LineKind::Exterior { dim, radius, .. } => omega * (radius * c.exp()).powi(dim as i32),
        }
    };
    let mut cells = Vec::with_capacity(n - 1);
    let mut quad = Vec::with_capacity(5 * (n - 1));
    for k in 0..n - 1 {
        let (c0, c1) = (nodes[k], nodes[k + 1]);
        let h = c1 - c0;
        let measure: f64 = GAUSS5.iter().map(|&(t, w)| w * h * grad_jac(c0 + t * h)).sum();
        cells.push(Cell {
            nodes: [k, k + 1, 0],
            len: 2,
            grad: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
            measure,
            centroid: embed(c0 + 0.5 * h),
        });
        for &(t, w) in &GAUSS5 {
            let c = c0 + t * h;
            quad.push(QuadPoint {
                nodes: [k, k + 1, 0],
                shape: [1.0 - t, t, 0.0],
                dx: w * h * norm_jac(c),
                x: embed(c),
            });
        }
    }
    let mut pinned = vec![false; n];
    let mut robin = Vec::new();
    let mut end = |node: usize, piece: usize, measure: f64| match partition.condition(piece) {
        Condition::Dirichlet => pinned[node] = true,
        Condition::Robin { sigma } => {
            if sigma > 0.0 {
                robin.push(RobinEntity {
                    piece,
                    sigma,
                    nodes: [node, node],
                    points: vec![([1.0, 0.0], measure)],
                })
            }
        }
    };
    match kind {
        LineKind::Interval => {
            end(0, 0, 1.0);
            end(n - 1, 1, 1.0);
        }
        LineKind::Ball { dim } => {
            let radius = nodes[n - 1];
            end(n - 1, 0, omega * radius.powi(dim as i32 - 1));
        }
        LineKind::Exterior { dim, radius, p } => {
            end(0, 0, omega * radius.powi(dim as i32 - 1));
            if p > dim as f64 {
                let rho = radius * nodes[n - 1].exp();
                quad.push(QuadPoint {
                    nodes: [n - 1, n - 1, 0],
                    shape: [1.0, 0.0, 0.0],
                    dx: omega * rho.powi(dim as i32) / (p - dim as f64),
                    x: embed(nodes[n - 1]),
                });
            } else {
                pinned[n - 1] = true;
            }
        }
    }
    Discretization {
        dim,
        node_positions: nodes.iter().map(|&c| embed(c)).collect(),
        pinned,
        cells,
        quad,
        robin,
        reduction: Reduction::default(),
    }
}

fn triangle_discretization(mesh: &crate::mesh::TriMesh, partition: &BoundaryPartition) -> Discretization {
    let mut cells = Vec::with_capacity(mesh.triangles.len());
    let mut quad = Vec::with_capacity(7 * mesh.triangles.len());
    for t in &mesh.triangles {
        let v = t.map(|i| mesh.vertices[i]);
        let area = mesh.area(t);
        let mut grad = [[0.0; 2]; 3];
        for k in 0..3 {
            let (p, q) = (v[(k + 1) % 3], v[(k + 2) % 3]);
            grad[k] = [(p[1] - q[1]) / (2.0 * area), (q[0] - p[0]) / (2.0 * area)];
        }
        cells.push(Cell {
            nodes: *t,
            len: 3,
            grad,
            measure: area,
            centroid: vec![(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0],
        });
        for (l, w) in &TRIANGLE7 {
            quad.push(QuadPoint {
                nodes: *t,
                shape: *l,
                dx: w * area,
                x: vec![
                    l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0],
                    l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1],
                ],
            });
        }
    }
    let mut pinned = vec![false; mesh.vertices.len()];
    let mut robin = Vec::new();
    for e in &mesh.boundary_edges {
        match partition.condition(e.piece) {
            Condition::Dirichlet => {
                pinned[e.nodes[0]] = true;
                pinned[e.nodes[1]] = true;
            }
            Condition::Robin { sigma } if sigma > 0.0 => {
                let len = mesh.edge_length(e.nodes[0], e.nodes[1]);
                robin.push(RobinEntity {
                    piece: e.piece,
                    sigma,
                    nodes: e.nodes,
                    points: GAUSS5.iter().map(|&(t, w)| ([1.0 - t, t], w * len)).collect(),
                });
            }
            Condition::Robin { .. } => {}
        }
    }
    Discretization {
        dim: 2,
        node_positions: mesh.vertices.iter().map(|v| v.to_vec()).collect(),
        pinned,
        cells,
        quad,
        robin,
        reduction: Reduction::default(),
    }
}

fn interp(q: &QuadPoint, u: &[f64]) -> f64 {
    q.shape[0] * u[q.nodes[0]] + q.shape[1] * u[q.nodes[1]] + q.shape[2] * u[q.nodes[2]]
}

/// `|v|^(p-2) v`, finite at 0 for every p > 1.
fn signed_pow(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(p - 1.0) * v.signum()
    }
}

/// `int |grad u|^p`, exact for piecewise-linear fields.
pub fn dirichlet_energy_p(disc: &Discretization, field: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    disc.check(field)?;
    let u = &field.values;
    Ok(disc.sum(&disc.cells, |c| {
        let g = disc.cell_gradient(c, u);
        c.measure * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
    }))
}

/// `int_{boundary} sigma |u|^p` over the Robin pieces.
pub fn boundary_energy(disc: &Discretization, field: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    disc.check(field)?;
    let u = &field.values;
    Ok(disc
        .robin
        .iter()
        .map(|e| {
            e.sigma
                * e.points
                    .iter()
                    .map(|(s, w)| w * (s[0] * u[e.nodes[0]] + s[1] * u[e.nodes[1]]).abs().powf(p))
                    .sum::<f64>()
        })
        .sum())
}

/// `int (delta + alpha)^(-p) |u|^p`, the p-th power of the weighted norm.
pub fn weighted_norm_pp(disc: &Discretization, field: &Field, weight: &HardyWeight, p: f64) -> Result<f64> {
    check_exponent(p)?;
    disc.check(field)?;
    disc.check_weight(weight)?;
    let u = &field.values;
    let recs = &weight.records;
    let idx: Vec<usize> = (0..disc.quad.len()).collect();
    Ok(disc.sum(&idx, |&i| {
        let q = &disc.quad[i];
        q.dx * recs[i].w * interp(q, u).abs().powf(p)
    }))
}

/// Numerator `Q_p[sigma, u]` of the quotient.
pub fn functional_q(disc: &Discretization, field: &Field, p: f64) -> Result<f64> {
    Ok(dirichlet_energy_p(disc, field, p)? + boundary_energy(disc, field, p)?)
}

pub fn rayleigh(disc: &Discretization, field: &Field, weight: &HardyWeight, p: f64) -> Result<f64> {
    let den = weighted_norm_pp(disc, field, weight, p)?;
    if !(den > 0.0) {
        return Err(HardyError::DegenerateField);
    }
    Ok(functional_q(disc, field, p)? / den)
}

/// Gradient of the quotient with respect to the nodal values; pinned nodes
/// get 0. Cells with vanishing gradient are regularised with
/// `|grad u| -> (|grad u|^2 + eps^2)^(1/2)`, `eps = 1e-12 * max |grad u|`.
pub fn rayleigh_gradient(disc: &Discretization, field: &Field, weight: &HardyWeight, p: f64) -> Result<Field> {
    let num = functional_q(disc, field, p)?;
    let den = weighted_norm_pp(disc, field, weight, p)?;
    if !(den > 0.0) {
        return Err(HardyError::DegenerateField);
    }
    let quotient = num / den;
    let u = &field.values;
    let grads: Vec<[f64; 2]> = disc.cells.iter().map(|c| disc.cell_gradient(c, u)).collect();
    let scale = grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let eps2 = (1e-12 * scale).powi(2);
    let mut out = vec![0.0; u.len()];
    if scale > 0.0 {
        for (c, g) in disc.cells.iter().zip(&grads) {
            let coef = p * c.measure * (g[0] * g[0] + g[1] * g[1] + eps2).powf(0.5 * p - 1.0);
            for k in 0..c.len {
                out[c.nodes[k]] += coef * (g[0] * c.grad[k][0] + g[1] * c.grad[k][1]);
            }
        }
    }
    for e in &disc.robin {
        for (s, w) in &e.points {
            let v = s[0] * u[e.nodes[0]] + s[1] * u[e.nodes[1]];
            let f = p * e.sigma * w * signed_pow(v, p);
            out[e.nodes[0]] += f * s[0];
            out[e.nodes[1]] += f * s[1];
        }
    }
    for (q, r) in disc.quad.iter().zip(&weight.records) {
        let f = -quotient * p * q.dx * r.w * signed_pow(interp(q, u), p);
        for k in 0..3 {
            if q.shape[k] != 0.0 {
                out[q.nodes[k]] += f * q.shape[k];
            }
        }
    }
    for (v, &pin) in out.iter_mut().zip(&disc.pinned) {
        *v = if pin { 0.0 } else { *v / den };
    }
    Ok(Field { values: out })
}

/// `int_{cells with centroid in region} |grad u|^p`.
pub fn local_gradient_energy(
    disc: &Discretization,
    field: &Field,
    p: f64,
    region: impl Fn(&[f64]) -> bool + Sync,
) -> Result<f64> {
    check_exponent(p)?;
    disc.check(field)?;
    let u = &field.values;
    Ok(disc.sum(&disc.cells, |c| {
        if region(&c.centroid) {
            let g = disc.cell_gradient(c, u);
            c.measure * (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_polygon_mesh};
    use approx::assert_abs_diff_eq;

    fn interval(n: usize, part: &dyn Fn(&Domain) -> BoundaryPartition) -> (Domain, BoundaryPartition, Discretization) {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let m = Mesh::Interval(build_interval_mesh(&d, n, 1.0, &[]).unwrap());
        let bp = part(&d);
        let disc = Discretization::new(&d, &m, &bp, 2.0).unwrap();
        (d, bp, disc)
    }

    #[test]
    fn energies_1d() {
        let (_, _, disc) = interval(10, &|d| BoundaryPartition::all_robin(d, 1.0).unwrap());
        let lin = Field::from_fn(&disc, |x| x[0]).unwrap();
        assert_abs_diff_eq!(dirichlet_energy_p(&disc, &lin, 2.0).unwrap(), 1.0, epsilon = 1e-13);
        let one = Field::from_fn(&disc, |_| 1.0).unwrap();
        assert_abs_diff_eq!(dirichlet_energy_p(&disc, &one, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn energies_2d() {
        let sq = Domain::unit_square();
        let m = Mesh::Triangles(build_polygon_mesh(&sq, 0.25, &[], 0.0).unwrap());
        let bp = BoundaryPartition::all_robin(&sq, 1.0).unwrap();
        let disc = Discretization::new(&sq, &m, &bp, 3.0).unwrap();
        let f = Field::from_fn(&disc, |x| x[0]).unwrap();
        assert_abs_diff_eq!(dirichlet_energy_p(&disc, &f, 3.0).unwrap(), 1.0, epsilon = 1e-12);
        let one = Field::from_fn(&disc, |_| 1.0).unwrap();
        for p in [1.5, 2.0, 3.0, 7.0] {
            assert_abs_diff_eq!(boundary_energy(&disc, &one, p).unwrap(), 4.0, epsilon = 1e-12);
        }
        let bp0 = BoundaryPartition::all_robin(&sq, 0.0).unwrap();
        let disc0 = Discretization::new(&sq, &m, &bp0, 2.0).unwrap();
        assert_eq!(
            boundary_energy(&disc0, &Field::from_fn(&disc0, |_| 1.0).unwrap(), 2.0).unwrap(),
            0.0
        );
    }

    #[test]
    fn robin_point_evaluation() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let m = Mesh::Interval(build_interval_mesh(&d, 4, 1.0, &[]).unwrap());
        let bp = BoundaryPartition::new(
            &d,
            vec![Condition::Robin { sigma: 3.0 }, Condition::Robin { sigma: 5.0 }],
        )
        .unwrap();
        let disc = Discretization::new(&d, &m, &bp, 2.0).unwrap();
        let f = Field::from_fn(&disc, |x| 2.0 * (1.0 - x[0])).unwrap();
        assert_abs_diff_eq!(boundary_energy(&disc, &f, 2.0).unwrap(), 12.0, epsilon = 1e-14);
    }

    #[test]
    fn weighted_norms_1d() {
        // u = 1, sigma = 2 at both ends: 2 int_0^{1/2} (t + 1/4)^-2 dt = 16/3
        let (d, bp, disc) = interval(100, &|d| BoundaryPartition::all_robin(d, 2.0).unwrap());
        let hw = HardyWeight::build(&d, &bp, 2.0, &disc.quad_positions()).unwrap();
        let one = Field::from_fn(&disc, |_| 1.0).unwrap();
        assert_abs_diff_eq!(
            weighted_norm_pp(&disc, &one, &hw, 2.0).unwrap(),
            16.0 / 3.0,
            epsilon = 1e-12
        );
        let zero = Field::from_fn(&disc, |_| 0.0).unwrap();
        assert_eq!(weighted_norm_pp(&disc, &zero, &hw, 2.0).unwrap(), 0.0);
        assert!(matches!(
            rayleigh(&disc, &zero, &hw, 2.0),
            Err(HardyError::DegenerateField)
        ));

        let (d, bp, disc) = interval(10, &|d| BoundaryPartition::all_dirichlet(d));
        let hw = HardyWeight::build(&d, &bp, 2.0, &disc.quad_positions()).unwrap();
        let tent = Field::from_fn(&disc, |x| x[0].min(1.0 - x[0])).unwrap();
        assert_abs_diff_eq!(weighted_norm_pp(&disc, &tent, &hw, 2.0).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(rayleigh(&disc, &tent, &hw, 2.0).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn quotient_of_constant_with_unit_robin() {
        // numerator 2, denominator 2 int_0^{1/2} (t + 1/2)^-2 dt = 2
        let (d, bp, disc) = interval(64, &|d| BoundaryPartition::all_robin(d, 1.0).unwrap());
        let hw = HardyWeight::build(&d, &bp, 2.0, &disc.quad_positions()).unwrap();
        let one = Field::from_fn(&disc, |_| 1.0).unwrap();
        assert_abs_diff_eq!(functional_q(&disc, &one, 2.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(weighted_norm_pp(&disc, &one, &hw, 2.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rayleigh(&disc, &one, &hw, 2.0).unwrap(), 1.0, epsilon = 1e-12);
        let seven = one.scaled(7.0);
        assert_abs_diff_eq!(rayleigh(&disc, &seven, &hw, 2.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (d, bp, disc) = interval(8, &|d| BoundaryPartition::all_dirichlet(d));
        let (_, _, other) = interval(16, &|d| BoundaryPartition::all_dirichlet(d));
        let hw = HardyWeight::build(&d, &bp, 2.0, &other.quad_positions()).unwrap();
        let f = Field::from_fn(&disc, |x| x[0] * (1.0 - x[0])).unwrap();
        assert_eq!(weighted_norm_pp(&disc, &f, &hw, 2.0), Err(HardyError::NonMatchingMesh));
        assert!(Field::new(&disc, vec![0.0; 3]).is_err());
    }

    #[test]
    fn pinned_nodes_are_zero() {
        let (_, _, disc) = interval(8, &|d| BoundaryPartition::all_dirichlet(d));
        let f = Field::from_fn(&disc, |_| 1.0).unwrap();
        assert_eq!(f.values[0], 0.0);
        assert_eq!(f.values[8], 0.0);
        assert_eq!(disc.free_nodes(), 7);
    }

    #[test]
    fn local_energy_whole_domain_matches() {
        let (_, _, disc) = interval(20, &|d| BoundaryPartition::all_dirichlet(d));
        let f = Field::from_fn(&disc, |x| (3.0 * x[0]).sin() * x[0] * (1.0 - x[0])).unwrap();
        let all = local_gradient_energy(&disc, &f, 2.5, |_| true).unwrap();
        assert_abs_diff_eq!(all, dirichlet_energy_p(&disc, &f, 2.5).unwrap(), epsilon = 1e-15);
        let (_, _, free) = interval(20, &|d| BoundaryPartition::all_robin(d, 1.0).unwrap());
        let c = Field::from_fn(&free, |_| 1.0).unwrap();
        assert_eq!(local_gradient_energy(&free, &c, 2.0, |_| true).unwrap(), 0.0);
    }

    #[test]
    fn parallel_reduction_matches_sequential() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let m = Mesh::Interval(build_interval_mesh(&d, 5000, 1.0, &[]).unwrap());
        let bp = BoundaryPartition::all_robin(&d, 1.0).unwrap();
        let seq = Discretization::new(&d, &m, &bp, 2.0).unwrap();
        let par = seq.clone().with_reduction(Reduction::Parallel);
        let hw = HardyWeight::build(&d, &bp, 2.0, &seq.quad_positions()).unwrap();
        let f = Field::from_fn(&seq, |x| 1.0 + x[0] * x[0]).unwrap();
        let a = rayleigh(&seq, &f, &hw, 2.0).unwrap();
        let b = rayleigh(&par, &f, &hw, 2.0).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        // parallel mode is itself deterministic
        assert_eq!(b, rayleigh(&par, &f, &hw, 2.0).unwrap());
    }

    fn fd_check(disc: &Discretization, hw: &HardyWeight, f: &Field, p: f64) {
        let g = rayleigh_gradient(disc, f, hw, p).unwrap();
        let step = 1e-6 * f.max_abs();
        for i in 0..f.values.len() {
            if disc.pinned[i] {
                assert_eq!(g.values[i], 0.0);
                continue;
            }
            let mut a = f.clone();
            let mut b = f.clone();
            a.values[i] += step;
            b.values[i] -= step;
            let fd = (rayleigh(disc, &a, hw, p).unwrap() - rayleigh(disc, &b, hw, p).unwrap()) / (2.0 * step);
            let scale = g.max_abs();
            assert!(
                (fd - g.values[i]).abs() <= 1e-5 * scale,
                "node {i}: {fd} vs {}",
                g.values[i]
            );
        }
        let euler = g.dot(f);
        assert!(
            euler.abs() < 1e-10 * g.max_abs() * f.max_abs() * f.values.len() as f64,
            "{euler}"
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let m = Mesh::Interval(build_interval_mesh(&d, 12, 0.8, &[0, 1]).unwrap());
        let bp = BoundaryPartition::new(&d, vec![Condition::Dirichlet, Condition::Robin { sigma: 2.0 }]).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let disc = Discretization::new(&d, &m, &bp, p).unwrap();
            let hw = HardyWeight::build(&d, &bp, p, &disc.quad_positions()).unwrap();
            let f = Field::from_fn(&disc, |x| 0.3 + (5.0 * x[0]).sin()).unwrap();
            fd_check(&disc, &hw, &f, p);
        }
        let sq = Domain::unit_square();
        let m = Mesh::Triangles(build_polygon_mesh(&sq, 0.5, &[], 0.0).unwrap());
        let bp = BoundaryPartition::all_robin(&sq, 1.0).unwrap();
        let disc = Discretization::new(&sq, &m, &bp, 2.5).unwrap();
        let hw = HardyWeight::build(&sq, &bp, 2.5, &disc.quad_positions()).unwrap();
        let f = Field::from_fn(&disc, |x| 1.0 + x[0] - 2.0 * x[1] * x[1]).unwrap();
        fd_check(&disc, &hw, &f, 2.5);
    }
}
