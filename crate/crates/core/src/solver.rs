//! Minimisation of the discrete Rayleigh quotient.
//!
//! Each step solves a linearised p-Laplace system for a preconditioned
//! descent direction, backtracks until the Armijo condition holds and
//! renormalises the iterate to unit weighted norm. For `p = 2` a unit step
//! is one step of inverse iteration.
//!
//! The estimate is the quotient of an explicit discrete field, so it is an
//! upper bound for the discrete problem and never a lower bound for the
//! continuum constant. When `Gamma` is not empty no continuum minimiser
//! exists and the infimum is only approached under mesh refinement.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::functional::{
    functional_q, local_gradient_energy, rayleigh, rayleigh_gradient, weighted_norm_pp, Discretization, Field,
    Reduction,
};
use crate::geometry::Domain;
use crate::mesh::{Mesh, MeshSummary};
use crate::oracles::certificates;
use crate::sparse::{dot, pcg, CsrMatrix, IncompleteCholesky, TripletBuilder};
use crate::weights::{check_exponent, BoundaryPartition, HardyWeight};

/// Number of iterations over which the relative decrease is measured.
pub const WINDOW: usize = 10;
/// Slack allowed below an analytic lower bound before a report is flagged.
pub const CERTIFICATE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `delta^((p-1)/p)`; 1 on the exterior of a ball.
    #[default]
    DeltaPower,
    Ones,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: Init,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            rel_tol: 1e-9,
            init: Init::DeltaPower,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(HardyError::Parameter("rel_tol must be > 0".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(HardyError::Parameter("shrink must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(HardyError::Parameter("armijo constant must lie in (0, 1)".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(HardyError::Parameter("initial_step must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to evaluate the quotient on one mesh.
#[derive(Debug, Clone)]
pub struct QuotientProblem {
    pub domain: Domain,
    pub partition: BoundaryPartition,
    pub p: f64,
    pub mesh: Mesh,
    pub disc: Discretization,
    pub weight: HardyWeight,
}

impl QuotientProblem {
    pub fn new(domain: Domain, partition: BoundaryPartition, p: f64, mesh: Mesh) -> Result<Self> {
        let disc = Discretization::new(&domain, &mesh, &partition, p)?;
        let weight = HardyWeight::build(&domain, &partition, p, &disc.quad_positions())?;
        Ok(Self {
            domain,
            partition,
            p,
            mesh,
            disc,
            weight,
        })
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.disc.reduction = reduction;
        self
    }

    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        Field::new(&self.disc, values)
    }

    pub fn quotient(&self, field: &Field) -> Result<f64> {
        rayleigh(&self.disc, field, &self.weight, self.p)
    }

    pub fn numerator(&self, field: &Field) -> Result<f64> {
        functional_q(&self.disc, field, self.p)
    }

    pub fn norm_pp(&self, field: &Field) -> Result<f64> {
        weighted_norm_pp(&self.disc, field, &self.weight, self.p)
    }

    pub fn gradient(&self, field: &Field) -> Result<Field> {
        rayleigh_gradient(&self.disc, field, &self.weight, self.p)
    }

    pub fn local_energy(&self, field: &Field, region: impl Fn(&[f64]) -> bool + Sync) -> Result<f64> {
        local_gradient_energy(&self.disc, field, self.p, region)
    }

    /// Rescales to unit weighted norm.
    pub fn normalize(&self, field: &Field) -> Result<Field> {
        let d = self.norm_pp(field)?;
        if !(d > 0.0) {
            return Err(HardyError::DegenerateField);
        }
        Ok(field.scaled(d.powf(-1.0 / self.p)))
    }

    pub fn initial_field(&self, init: &Init) -> Result<Field> {
        match init {
            Init::Ones => Field::from_fn(&self.disc, |_| 1.0),
            Init::DeltaPower if matches!(self.domain, Domain::ExteriorBall { .. }) => {
                Field::from_fn(&self.disc, |_| 1.0)
            }
            Init::DeltaPower => {
                let e = (self.p - 1.0) / self.p;
                Field::from_fn(&self.disc, |x| self.domain.distance_unchecked(x).powf(e))
            }
            Init::Custom(v) => self.field(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientReport {
    pub lambda_estimate: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub analytic_lower: Option<f64>,
    pub analytic_upper: Option<f64>,
    pub converged: bool,
    pub violation: bool,
    pub p: f64,
    pub mesh: MeshSummary,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub field: Field,
}

impl QuotientReport {
    /// Re-evaluates the certificate check against `lambda_estimate`.
    fn check(&mut self) {
        self.violation = self
            .analytic_lower
            .is_some_and(|l| self.lambda_estimate < l - CERTIFICATE_SLACK);
        if self.violation {
            self.notes
                .push("estimate lies below the analytic lower bound: quadrature or mesh fault".into());
        }
    }
}

/// Linearisation of the numerator around `u`: the p-Laplace stiffness with
/// coefficient `(p-1) |grad u|^(p-2)` plus the matching Robin term, with a
/// relative diagonal shift of 1e-10. Pinned rows are replaced by the identity.
fn linearization(disc: &Discretization, u: &[f64], p: f64) -> CsrMatrix {
    let n = u.len();
    let pinned = &disc.pinned;
    let mut t = TripletBuilder::new(n);
    let mut diag = vec![0.0; n];
    let mut add = |i: usize, j: usize, v: f64| {
        if !pinned[i] && !pinned[j] {
            t.add(i, j, v);
            if i == j {
                diag[i] += v;
            }
        }
    };
    let grads: Vec<[f64; 2]> = disc.cells.iter().map(|c| disc.cell_gradient(c, u)).collect();
    let gscale = grads.iter().map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let uscale = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gfloor = (1e-6 * gscale).powi(2);
    let ufloor = (1e-6 * uscale).powi(2);
    for (c, g) in disc.cells.iter().zip(&grads) {
        let coef = if p == 2.0 || gscale == 0.0 {
            c.measure
        } else {
            (p - 1.0) * c.measure * (g[0] * g[0] + g[1] * g[1]).max(gfloor).powf(0.5 * p - 1.0)
        };
        for a in 0..c.len {
            for b in 0..c.len {
                add(
                    c.nodes[a],
                    c.nodes[b],
                    coef * (c.grad[a][0] * c.grad[b][0] + c.grad[a][1] * c.grad[b][1]),
                );
            }
        }
    }
    for e in &disc.robin {
        for (s, w) in &e.points {
            let v = s[0] * u[e.nodes[0]] + s[1] * u[e.nodes[1]];
            let coef = if p == 2.0 {
                e.sigma * w
            } else {
                (p - 1.0) * e.sigma * w * (v * v).max(ufloor).powf(0.5 * p - 1.0)
            };
            for a in 0..2 {
                for b in 0..2 {
                    add(e.nodes[a], e.nodes[b], coef * s[a] * s[b]);
                }
            }
        }
    }
    for i in 0..n {
        t.add(i, i, if pinned[i] { 1.0 } else { 1e-10 * diag[i] });
    }
    t.build()
}

struct Direction {
    system: Option<(CsrMatrix, IncompleteCholesky)>,
}

impl Direction {
    fn compute(&mut self, disc: &Discretization, u: &[f64], g: &[f64], den: f64, p: f64) -> Vec<f64> {
        if self.system.is_none() || p != 2.0 {
            let a = linearization(disc, u, p);
            let ic = IncompleteCholesky::new(&a);
            self.system = Some((a, ic));
        }
        let (a, ic) = self.system.as_ref().unwrap();
        let rhs: Vec<f64> = g.iter().map(|v| -v * den / p).collect();
        let mut d = pcg(a, ic, &rhs, 1e-8, 200);
        for (v, &pin) in d.iter_mut().zip(&disc.pinned) {
            if pin {
                *v = 0.0;
            }
        }
        if !(dot(g, &d) < 0.0) {
            d = rhs;
        }
        d
    }
}

/// Minimises the quotient from `config.init` and attaches the analytic
/// certificates that apply to the configuration.
pub fn minimize_quotient(problem: &QuotientProblem, config: &SolverConfig) -> Result<QuotientReport> {
    config.validate()?;
    check_exponent(problem.p)?;
    let disc = &problem.disc;
    if disc.free_nodes() == 0 {
        return Err(HardyError::AllPinned);
    }
    let p = problem.p;
    let mut u = problem.normalize(&problem.initial_field(&config.init)?)?;
    let mut q = problem.quotient(&u)?;
    if q.is_nan() {
        return Err(HardyError::LineSearchNan(0));
    }
    let mut history = vec![q];
    let mut notes = Vec::new();
    let mut converged = false;
    let mut dir = Direction { system: None };
    let mut iterations = 0;
    for it in 1..=config.max_iter {
        let g = problem.gradient(&u)?;
        if g.max_abs() == 0.0 {
            converged = true;
            notes.push("gradient vanished".into());
            break;
        }
        let den = problem.norm_pp(&u)?;
        let d = dir.compute(disc, &u.values, &g.values, den, p);
        let slope = dot(&g.values, &d);
        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = Field {
                values: u.values.iter().zip(&d).map(|(a, b)| a + step * b).collect(),
            };
            match problem.quotient(&trial) {
                Ok(r) if r.is_nan() => return Err(HardyError::LineSearchNan(it)),
                Ok(r) if r <= q + config.armijo * step * slope => {
                    accepted = Some((trial, r));
                    break;
                }
                Ok(_) | Err(HardyError::DegenerateField) => step *= config.shrink,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, r)) = accepted else {
            converged = true;
            notes.push("line search stalled at the resolution of the quotient".into());
            break;
        };
        u = problem.normalize(&trial)?;
        q = r;
        history.push(q);
        iterations = it;
        let k = history.len();
        if k > WINDOW && history[k - 1 - WINDOW] - q <= config.rel_tol * q.abs() {
            converged = true;
            break;
        }
    }
    if !converged {
        notes.push(format!(
            "max_iter = {} reached before the stopping rule",
            config.max_iter
        ));
    }
    notes.push("lambda_estimate is the quotient of a discrete field: an upper bound for the discrete problem, not a lower bound for lambda_p".into());
    if !problem.partition.gamma_is_empty() {
        notes
            .push("Gamma is not empty: no minimiser exists and the infimum is approached only under refinement".into());
    }
    let cert = certificates(&problem.domain, &problem.partition, p)?;
    notes.extend(cert.notes);
    let mut report = QuotientReport {
        lambda_estimate: q,
        iterations,
        history,
        analytic_lower: cert.lower,
        analytic_upper: cert.upper,
        converged,
        violation: false,
        p,
        mesh: problem.mesh.summary(),
        notes,
        field: u,
    };
    report.check();
    Ok(report)
}

/// Estimates from several starting fields. Whether descent from an
/// arbitrary start reaches the minimiser is not known, so the spread is
/// reported as an observation.
#[derive(Debug, Clone, Serialize)]
pub struct MultiStart {
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub spread: f64,
    #[serde(skip)]
    pub best: QuotientReport,
}

/// Runs `config.init` followed by `random` starts with nodal values uniform
/// in `[0, 1)`, drawn from `seed`. Starts run concurrently; `estimates`
/// keeps their order.
pub fn multi_start(problem: &QuotientProblem, config: &SolverConfig, seed: u64, random: usize) -> Result<MultiStart> {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = problem.disc.num_nodes();
    let mut configs = vec![config.clone()];
    for _ in 0..random {
        configs.push(SolverConfig {
            init: Init::Custom((0..n).map(|_| rng.random_range(0.0..1.0)).collect()),
            ..config.clone()
        });
    }
    let reports = configs
        .par_iter()
        .map(|c| minimize_quotient(problem, c))
        .collect::<Result<Vec<_>>>()?;
    let estimates: Vec<f64> = reports.iter().map(|r| r.lambda_estimate).collect();
    let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = reports
        .into_iter()
        .min_by(|a, b| a.lambda_estimate.total_cmp(&b.lambda_estimate))
        .expect("at least one start");
    Ok(MultiStart {
        seed,
        estimates,
        spread: hi - lo,
        best,
    })
}

#[derive(Debug, Clone)]
pub struct SequenceLevel {
    pub problem: QuotientProblem,
    pub report: QuotientReport,
    pub quotient: f64,
    pub norm_pp: f64,
}

impl SequenceLevel {
    pub fn field(&self) -> &Field {
        &self.report.field
    }
}

/// Refines a mesh so that the new space contains the old one, returning the
/// prolongation of nodal values.
fn refine(mesh: &Mesh, partition: &BoundaryPartition, values: &[f64]) -> Result<(Mesh, Vec<f64>)> {
    match mesh {
        Mesh::Interval(m) => {
            let gamma = partition.dirichlet_pieces();
            let ends: Vec<usize> = gamma
                .iter()
                .copied()
                .filter(|&g| Some(g) == m.left_piece || Some(g) == m.right_piece)
                .collect();
            // concentration happens at Gamma: add geometric layers there so
            // the resolved log-range grows with the cell count
            let fine = if ends.is_empty() {
                m.bisect()
            } else {
                m.refine_toward(&ends, (m.cells() / ends.len()).max(1), crate::mesh::DEFAULT_RATIO)?
            };
            let v = fine.nodes.iter().map(|&t| m.interpolate(values, t)).collect();
            Ok((Mesh::Interval(fine), v))
        }
        Mesh::RadialLog(m) => {
            let fine = m.bisect();
            let mut v = Vec::with_capacity(fine.s_nodes.len());
            for w in values.windows(2) {
                v.push(w[0]);
                v.push(0.5 * (w[0] + w[1]));
            }
            v.push(values[values.len() - 1]);
            Ok((Mesh::RadialLog(fine), v))
        }
        Mesh::Triangles(t) => {
            let mut fine = t.clone();
            let parents = fine.refine_uniform();
            let mut v = values.to_vec();
            for [a, b] in parents {
                v.push(0.5 * (v[a] + v[b]));
            }
            Ok((Mesh::Triangles(fine), v))
        }
    }
}

/// Minimises on `levels` nested meshes, each level started from the
/// prolongated minimiser of the previous one, so the quotients do not
/// increase beyond quadrature noise. Every field has unit weighted norm.
pub fn minimizing_sequence(
    domain: &Domain,
    partition: &BoundaryPartition,
    p: f64,
    base: Mesh,
    levels: usize,
    config: &SolverConfig,
) -> Result<Vec<SequenceLevel>> {
    if levels < 2 {
        return Err(HardyError::Parameter(
            "a minimizing sequence needs at least 2 levels".into(),
        ));
    }
    let mut out: Vec<SequenceLevel> = Vec::with_capacity(levels);
    let mut mesh = base;
    let mut cfg = config.clone();
    for _ in 0..levels {
        if let Some(prev) = out.last() {
            let (fine, values) = refine(&mesh, partition, &prev.field().values)?;
            mesh = fine;
            cfg.init = Init::Custom(values);
        }
        let problem = QuotientProblem::new(domain.clone(), partition.clone(), p, mesh.clone())?;
        let report = minimize_quotient(&problem, &cfg)?;
        let quotient = problem.quotient(&report.field)?;
        let norm_pp = problem.norm_pp(&report.field)?;
        out.push(SequenceLevel {
            problem,
            report,
            quotient,
            norm_pp,
        });
    }
    Ok(out)
}
