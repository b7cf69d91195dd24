//! Closed-form and quadrature evaluators for the explicit constants, bounds
//! and test families: the one-dimensional Robin Hardy inequality, the
//! in-radius bound, the improved Hardy right-hand side, the `u_eps` family
//! that saturates `C_p`, and the ball upper bound.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::exterior::{classical_exterior_constant, robin_exterior_constant};
use crate::functional::{functional_q, weighted_norm_pp, Discretization, Field};
use crate::geometry::{norm, Domain};
use crate::mesh::{build_polygon_mesh, Mesh};
use crate::quadrature::adaptive_gauss;
use crate::solver::{minimize_quotient, QuotientProblem, SolverConfig};
use crate::weights::{alpha_at, check_exponent, cp_constant, BoundaryPartition, Condition, HardyWeight};

/// Piecewise-linear profile on `[0, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Profile1D {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(HardyError::Parameter(
                "a profile needs at least two breakpoints and one value per breakpoint".into(),
            ));
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HardyError::Parameter("breakpoints must start at 0 and increase".into()));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(HardyError::Parameter("profile data must be finite".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, u)| (t[0], t[1], u[0], u[1]))
    }
}

/// Both sides of the one-dimensional inequality
/// `int_0^b |u'|^p + sigma |u(0)|^p >= C_p int_0^b |u|^p / (t + alpha)^p
///  + (p - 1) C_p (b + alpha)^(-p) int_0^b |u|^p`.
///
/// `sigma = inf` is the Dirichlet case; the profile must then vanish at 0.
pub fn lemma1_sides(profile: &Profile1D, sigma: f64, p: f64) -> Result<(f64, f64)> {
    let cp = cp_constant(p)?;
    if sigma.is_nan() || sigma < 0.0 {
        return Err(HardyError::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let u0 = profile.values[0];
    let boundary = if sigma == f64::INFINITY {
        if u0 != 0.0 {
            return Err(HardyError::InfeasibleProfile(format!(
                "Dirichlet trace requires u(0) = 0, got {u0}"
            )));
        }
        0.0
    } else {
        sigma * u0.abs().powf(p)
    };
    let mut lhs = boundary;
    let mut weighted = 0.0;
    let mut plain = 0.0;
    let alpha = alpha_at(p, sigma);
    for (t0, t1, u0, u1) in profile.segments() {
        let h = t1 - t0;
        lhs += ((u1 - u0) / h).abs().powf(p) * h;
        let u = |t: f64| u0 + (u1 - u0) * (t - t0) / h;
        plain += adaptive_gauss(t0, t1, 1e-14, &|t| u(t).abs().powf(p));
        if alpha.is_finite() {
            weighted += adaptive_gauss(t0, t1, 1e-14, &|t| (u(t).abs() / (t + alpha)).powf(p));
        }
    }
    let rhs = if alpha.is_finite() {
        cp * weighted + (p - 1.0) * cp * (profile.length() + alpha).powf(-p) * plain
    } else {
        0.0
    };
    Ok((lhs, rhs))
}

/// `C_p (1 + (1 + p r_in sigma_max^(1/(p-1)))^(-p))`.
pub fn theorem2_bound(p: f64, r_in: f64, sigma_max: f64) -> Result<f64> {
    let cp = cp_constant(p)?;
    if !(r_in > 0.0) || !(sigma_max > 0.0) {
        return Err(HardyError::Parameter("in-radius and sigma_max must be positive".into()));
    }
    if sigma_max == f64::INFINITY {
        return Ok(cp);
    }
    Ok(cp * (1.0 + (1.0 + p * r_in * sigma_max.powf(1.0 / (p - 1.0))).powf(-p)))
}

/// `C_p ||u||^p + (p - 1) C_p int |u|^p / (R_in + alpha)^p`, the right side of
/// the improved Hardy inequality. Uses the same quadrature as the functional.
pub fn hardy_rhs_full(disc: &Discretization, field: &Field, weight: &HardyWeight, p: f64, r_in: f64) -> Result<f64> {
    let cp = cp_constant(p)?;
    let main = weighted_norm_pp(disc, field, weight, p)?;
    let u = &field.values;
    let extra: f64 = disc
        .quad
        .iter()
        .zip(&weight.records)
        .map(|(q, r)| {
            if r.alpha.is_finite() {
                let v = q.shape[0] * u[q.nodes[0]] + q.shape[1] * u[q.nodes[1]] + q.shape[2] * u[q.nodes[2]];
                q.dx * (v.abs() / (r_in + r.alpha)).powf(p)
            } else {
                0.0
            }
        })
        .sum();
    Ok(cp * main + (p - 1.0) * cp * extra)
}

/// Nodal interpolant of the concentrating family: `delta^(f + 1 - 1/p)` for
/// `delta <= eps`, linear in `delta` down to 0 on `[eps, 2 eps]`, zero
/// beyond, with `f = eps` within `r` of the anchor, `1/p` beyond `r + eps`
/// and linear in `|x - anchor|` in between.
pub fn u_eps_field(
    disc: &Discretization,
    domain: &Domain,
    partition: &BoundaryPartition,
    anchor: &[f64],
    r: f64,
    eps: f64,
    p: f64,
) -> Result<Field> {
    check_exponent(p)?;
    if !(eps > 0.0) || !(r > 0.0) {
        return Err(HardyError::Parameter("r and eps must be positive".into()));
    }
    if 2.0 * eps >= domain.inradius()? {
        return Err(HardyError::Parameter("2 eps must be smaller than the in-radius".into()));
    }
    let proj = domain.boundary_projection(anchor)?;
    let scale = domain.inradius()?;
    if proj.distance > 1e-12 * scale || partition.condition(proj.piece) != Condition::Dirichlet {
        return Err(HardyError::Parameter("anchor must lie on a Dirichlet piece".into()));
    }
    for piece in 0..domain.num_pieces() {
        if !partition.condition(piece).is_dirichlet() && piece_distance(domain, piece, anchor)? <= r + eps {
            return Err(HardyError::Parameter(format!(
                "ball around the anchor reaches the Robin piece {piece}"
            )));
        }
    }
    Field::from_fn(disc, |x| {
        let delta = domain.distance_unchecked(x);
        let dist: f64 = x.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let f = if dist <= r {
            eps
        } else if dist >= r + eps {
            1.0 / p
        } else {
            eps + (1.0 / p - eps) * (dist - r) / eps
        };
        let expo = f + 1.0 - 1.0 / p;
        if delta <= eps {
            delta.powf(expo)
        } else if delta <= 2.0 * eps {
            eps.powf(expo) * (2.0 * eps - delta) / eps
        } else {
            0.0
        }
    })
}

/// Distance from `y` to one boundary piece.
pub fn piece_distance(domain: &Domain, piece: usize, y: &[f64]) -> Result<f64> {
    match domain {
        Domain::Interval { a, b } => Ok(if piece == 0 { (y[0] - a).abs() } else { (y[0] - b).abs() }),
        Domain::ConvexPolygon { vertices } => {
            let p = vertices[piece];
            let q = vertices[(piece + 1) % vertices.len()];
            let d = [q[0] - p[0], q[1] - p[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = (((y[0] - p[0]) * d[0] + (y[1] - p[1]) * d[1]) / len2).clamp(0.0, 1.0);
            Ok((y[0] - p[0] - t * d[0]).hypot(y[1] - p[1] - t * d[1]))
        }
        Domain::Ball { radius, .. } | Domain::ExteriorBall { radius, .. } => Ok((norm(y) - radius).abs()),
    }
}

/// Quotient of the continuous `u_eps` on the Dirichlet interval `[0, 1]`
/// anchored at 0 with `r = 1/2`. Near 0 the field is `t^(eps + 1 - 1/p)`;
/// near 1 it is `1 - t` (exponent 1), each followed by its linear cut-off.
/// The power part is integrated exactly after the substitution
/// `t = eps y^(1/(eps p))`, the cut-offs by adaptive Gauss.
pub fn u_eps_quotient_interval(eps: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    if !(eps > 0.0 && eps < 1.0 / 6.0) {
        return Err(HardyError::Parameter("eps must lie in (0, 1/6)".into()));
    }
    let cutoff = |a: f64| {
        adaptive_gauss(eps, 2.0 * eps, 1e-14, &|t| {
            (eps.powf(a) * (2.0 * eps - t) / eps / t).powf(p)
        })
    };
    let a = eps + 1.0 - 1.0 / p;
    // int_0^eps t^(eps p - 1) dt, shared by |u'|^p / a^p and |u|^p t^(-p)
    let core = eps.powf(eps * p) / (eps * p);
    let near_num = a.powf(p) * core + eps.powf((a - 1.0) * p) * eps;
    let near_den = core + cutoff(a);
    let far_num = 2.0 * eps;
    let far_den = eps + cutoff(1.0);
    Ok((near_num + far_num) / (near_den + far_den))
}

/// `C_p + sigma alpha^(p-1) R^(n-1) / int_0^R r^(n-1) (R + alpha - r)^(-1) dr`,
/// the quotient bound of `u_R = (R + alpha - |x|)^((p-1)/p)` on `B_R`.
pub fn ball_upper_bound(n: usize, p: f64, sigma: f64, radius: f64) -> Result<f64> {
    let cp = cp_constant(p)?;
    if n < 1 || !(sigma > 0.0 && sigma.is_finite()) || !(radius > 0.0) {
        return Err(HardyError::Parameter("need n >= 1, 0 < sigma < inf and R > 0".into()));
    }
    Ok(cp + ball_correction(n, p, sigma, radius))
}

fn ball_correction(n: usize, p: f64, sigma: f64, radius: f64) -> f64 {
    let alpha = alpha_at(p, sigma);
    let top = radius + alpha;
    // v = R + alpha - r = e^y
    let integral = adaptive_gauss(alpha.ln(), top.ln(), 1e-12, &|y: f64| {
        (top - y.exp()).max(0.0).powi(n as i32 - 1)
    });
    sigma * alpha.powf(p - 1.0) * radius.powi(n as i32 - 1) / integral
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub notes: Vec<String>,
}

/// Analytic bounds on the continuum constant that apply to a configuration.
pub fn certificates(domain: &Domain, partition: &BoundaryPartition, p: f64) -> Result<Certificates> {
    let cp = cp_constant(p)?;
    let mut notes = Vec::new();
    if let Domain::ExteriorBall { dim, radius, .. } = *domain {
        let n = dim as f64;
        let sigma = partition.condition(0).sigma();
        let lower = if p > n {
            if sigma > 0.0 {
                Some(if sigma.is_finite() {
                    robin_exterior_constant(dim, p, sigma, radius)?
                } else {
                    ((p - n) / p).powf(p)
                })
            } else {
                notes.push("sigma = 0 with p > n: constants have zero energy".into());
                Some(0.0)
            }
        } else if n > p {
            Some(classical_exterior_constant(dim, p)?)
        } else {
            notes.push("p = n: no Hardy inequality holds on the exterior of a ball".into());
            None
        };
        notes.push("radial profiles only: the estimate bounds the radial infimum".into());
        return Ok(Certificates {
            lower,
            upper: None,
            notes,
        });
    }
    let r_in = domain.inradius()?;
    let (lower, upper) = if !partition.gamma_is_empty() {
        (Some(cp), Some(cp))
    } else {
        let smax = partition.sigma_max();
        let lower = if smax > 0.0 {
            Some(theorem2_bound(p, r_in, smax)?)
        } else {
            None
        };
        let upper = match (domain, partition.constant_sigma()) {
            (Domain::Ball { dim, radius }, Some(s)) if s > 0.0 => Some(ball_upper_bound(*dim, p, s, *radius)?),
            (Domain::Interval { a, b }, Some(s)) if s > 0.0 => Some(ball_upper_bound(1, p, s, 0.5 * (b - a))?),
            _ => None,
        };
        (lower, upper)
    };
    if matches!(domain, Domain::ConvexPolygon { .. }) {
        notes.push("polygon boundary is not C^2; bounds are those proved for smooth convex domains".into());
    }
    Ok(Certificates { lower, upper, notes })
}

/// `(sigma, lambda_estimate)` pairs for constant Robin coefficients, sorted
/// by sigma. Independent solves run concurrently.
pub fn sigma_limit_probe(
    domain: &Domain,
    mesh: &Mesh,
    p: f64,
    sigmas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<(f64, f64)>> {
    let mut sigmas = sigmas.to_vec();
    if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(HardyError::Parameter("probe sigmas must be positive and finite".into()));
    }
    sigmas.sort_by(f64::total_cmp);
    sigmas
        .par_iter()
        .map(|&s| {
            let part = BoundaryPartition::all_robin(domain, s)?;
            let problem = QuotientProblem::new(domain.clone(), part, p, mesh.clone())?;
            Ok((s, minimize_quotient(&problem, config)?.lambda_estimate))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzFailure {
    pub case: usize,
    pub input: FuzzInput,
    pub lhs: f64,
    pub rhs: f64,
}

/// Inputs recorded with a failure so it can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum FuzzInput {
    Lemma {
        profile: Profile1D,
        #[serde(serialize_with = "extended")]
        sigma: f64,
        p: f64,
    },
    HardyFull {
        class: String,
        p: f64,
        values: Vec<f64>,
    },
}

fn extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzSummary {
    pub suite: String,
    pub seed: u64,
    pub checks: usize,
    pub tolerance: f64,
    pub failures: Vec<FuzzFailure>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Random profiles with 2 to 20 breakpoints on `[0, b]`, values in
/// `[-1, 1]`, sigma uniform in `[0, 10]` or `+inf` (one case in ten), each
/// checked for every `p` in `ps`. With `negate` the inequality is reversed,
/// which makes the suite fail; it exists to exercise the failure path.
pub fn lemma1_fuzz(seed: u64, cases: usize, ps: &[f64], tol: f64, negate: bool) -> Result<FuzzSummary> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(cases * ps.len());
    for _ in 0..cases {
        let k = rng.random_range(2..=20usize);
        let b = rng.random_range(0.2..3.0);
        let mut cuts: Vec<f64> = (0..k - 2).map(|_| rng.random_range(0.0..b)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut breakpoints = vec![0.0];
        for c in cuts {
            if c > *breakpoints.last().unwrap() + 1e-9 * b && c < b * (1.0 - 1e-9) {
                breakpoints.push(c);
            }
        }
        breakpoints.push(b);
        let dirichlet = rng.random_bool(0.1);
        let sigma = if dirichlet {
            f64::INFINITY
        } else {
            rng.random_range(0.0..=10.0)
        };
        let mut values: Vec<f64> = breakpoints.iter().map(|_| rng.random_range(-1.0..=1.0)).collect();
        if dirichlet {
            values[0] = 0.0;
        }
        let profile = Profile1D::new(breakpoints, values)?;
        for &p in ps {
            inputs.push((profile.clone(), sigma, p));
        }
    }
    let results = inputs
        .par_iter()
        .map(|(profile, sigma, p)| lemma1_sides(profile, *sigma, *p))
        .collect::<Result<Vec<_>>>()?;
    let failures = inputs
        .into_iter()
        .zip(results)
        .enumerate()
        .filter_map(|(case, ((profile, sigma, p), (lhs, rhs)))| {
            let slack = tol * lhs.max(1.0);
            let ok = if negate { rhs >= lhs + slack } else { lhs >= rhs - slack };
            (!ok).then_some(FuzzFailure {
                case,
                input: FuzzInput::Lemma { profile, sigma, p },
                lhs,
                rhs,
            })
        })
        .collect();
    Ok(FuzzSummary {
        suite: "lemma1".into(),
        seed,
        checks: cases * ps.len(),
        tolerance: tol,
        failures,
    })
}

/// Partition classes used by [`hardy_full_fuzz`] on the unit square.
pub fn square_partitions() -> Vec<(&'static str, BoundaryPartition)> {
    let sq = Domain::unit_square();
    let robin = Condition::Robin { sigma: 1.0 };
    vec![
        ("dirichlet", BoundaryPartition::all_dirichlet(&sq)),
        ("robin", BoundaryPartition::all_robin(&sq, 1.0).expect("valid sigma")),
        (
            "mixed",
            BoundaryPartition::new(&sq, vec![Condition::Dirichlet, robin, robin, robin]).expect("four pieces"),
        ),
    ]
}

/// Random fields on a unit-square mesh of size `h` checked against
/// `Q_p >= hardy_rhs_full - tol * max(1, Q_p)` for each partition class.
/// Fields mix a random quadratic with nodal noise of random amplitude.
pub fn hardy_full_fuzz(seed: u64, cases: usize, h: f64, p: f64, tol: f64, negate: bool) -> Result<FuzzSummary> {
    let sq = Domain::unit_square();
    let tri = build_polygon_mesh(&sq, h, &[], 0.0)?;
    let mesh = Mesh::Triangles(tri);
    let r_in = sq.inradius()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut checks = 0;
    for (class, part) in square_partitions() {
        let disc = Discretization::new(&sq, &mesh, &part, p)?;
        let weight = HardyWeight::build(&sq, &part, p, &disc.quad_positions())?;
        let fields = (0..cases)
            .map(|_| {
                let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
                let noise = rng.random_range(0.0..1.0);
                let values = disc
                    .node_positions
                    .iter()
                    .map(|x| {
                        c[0] + c[1] * x[0]
                            + c[2] * x[1]
                            + c[3] * x[0] * x[0]
                            + c[4] * x[0] * x[1]
                            + c[5] * x[1] * x[1]
                            + noise * rng.random_range(-1.0..=1.0)
                    })
                    .collect();
                Field::new(&disc, values)
            })
            .collect::<Result<Vec<_>>>()?;
        let sides = fields
            .par_iter()
            .map(|f| {
                if weighted_norm_pp(&disc, f, &weight, p)? == 0.0 {
                    return Ok(None);
                }
                Ok(Some((
                    functional_q(&disc, f, p)?,
                    hardy_rhs_full(&disc, f, &weight, p, r_in)?,
                )))
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, (field, side)) in fields.into_iter().zip(sides).enumerate() {
            let Some((lhs, rhs)) = side else { continue };
            checks += 1;
            let slack = tol * lhs.max(1.0);
            let ok = if negate { rhs >= lhs + slack } else { lhs >= rhs - slack };
            if !ok {
                failures.push(FuzzFailure {
                    case: k,
                    input: FuzzInput::HardyFull {
                        class: class.into(),
                        p,
                        values: field.values,
                    },
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(FuzzSummary {
        suite: "hardy_full".into(),
        seed,
        checks,
        tolerance: tol,
        failures,
    })
}
