//! The Hardy constant `C_p`, the boundary length `alpha` induced by a Robin
//! coefficient, and the singular weight `(delta + alpha)^(-p)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::geometry::{norm, Domain};

/// `((p - 1) / p)^p`.
pub fn cp_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(((p - 1.0) / p).powf(p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(HardyError::Parameter(format!("exponent p must be > 1, got {p}")))
    }
}

/// `((p - 1) / p) * sigma^(1 / (1 - p))`, with `sigma = inf` giving 0 and
/// `sigma = 0` giving `inf`.
pub fn alpha_at(p: f64, sigma: f64) -> f64 {
    if sigma == f64::INFINITY {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        (p - 1.0) / p * sigma.powf(1.0 / (1.0 - p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    Dirichlet,
    Robin { sigma: f64 },
}

impl Condition {
    /// Robin coefficient, `+inf` on Dirichlet pieces.
    pub fn sigma(&self) -> f64 {
        match self {
            Condition::Dirichlet => f64::INFINITY,
            Condition::Robin { sigma } => *sigma,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Condition::Dirichlet)
    }
}

/// One boundary condition per boundary piece, indexed by piece id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPartition {
    conditions: Vec<Condition>,
}

impl BoundaryPartition {
    pub fn new(domain: &Domain, conditions: Vec<Condition>) -> Result<Self> {
        if conditions.len() != domain.num_pieces() {
            return Err(HardyError::Partition(format!(
                "domain has {} boundary pieces but {} conditions were given",
                domain.num_pieces(),
                conditions.len()
            )));
        }
        for (i, c) in conditions.iter().enumerate() {
            if let Condition::Robin { sigma } = c {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(HardyError::Partition(format!(
                        "Robin coefficient on piece {i} must be finite and >= 0, got {sigma}"
                    )));
                }
            }
        }
        Ok(Self { conditions })
    }

    pub fn all_dirichlet(domain: &Domain) -> Self {
        Self {
            conditions: vec![Condition::Dirichlet; domain.num_pieces()],
        }
    }

    pub fn all_robin(domain: &Domain, sigma: f64) -> Result<Self> {
        Self::new(domain, vec![Condition::Robin { sigma }; domain.num_pieces()])
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn condition(&self, piece: usize) -> Condition {
        self.conditions[piece]
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// True when no piece carries a Dirichlet condition.
    pub fn gamma_is_empty(&self) -> bool {
        !self.conditions.iter().any(Condition::is_dirichlet)
    }

    pub fn dirichlet_pieces(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.conditions[i].is_dirichlet()).collect()
    }

    /// Largest finite Robin coefficient (the L-infinity norm of sigma off Gamma).
    pub fn sigma_max(&self) -> f64 {
        self.conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Robin { sigma } => Some(*sigma),
                Condition::Dirichlet => None,
            })
            .fold(0.0, f64::max)
    }

    /// Common sigma if every piece is Robin with the same coefficient.
    pub fn constant_sigma(&self) -> Option<f64> {
        let first = self.conditions.first()?.sigma();
        (first.is_finite() && self.conditions.iter().all(|c| c.sigma() == first)).then_some(first)
    }

    pub fn has_zero_sigma(&self) -> bool {
        self.conditions
            .iter()
            .any(|c| matches!(c, Condition::Robin { sigma } if *sigma == 0.0))
    }
}

/// `(delta(x) + alpha(x))^(-p)` on bounded domains, with alpha taken from the
/// piece that `x` projects to. On the exterior of a ball the weight is the
/// classical `|x|^(-p)`.
pub fn weight_at(domain: &Domain, partition: &BoundaryPartition, p: f64, x: &[f64]) -> Result<f64> {
    check_exponent(p)?;
    Ok(record_at(domain, partition, p, x)?.w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRecord {
    pub x: Vec<f64>,
    pub delta: f64,
    pub piece: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub w: f64,
}

fn record_at(domain: &Domain, partition: &BoundaryPartition, p: f64, x: &[f64]) -> Result<WeightRecord> {
    let proj = domain.boundary_projection(x)?;
    let sigma = partition.condition(proj.piece).sigma();
    let alpha = alpha_at(p, sigma);
    let w = match domain {
        Domain::ExteriorBall { .. } => norm(x).powf(-p),
        _ if alpha == f64::INFINITY => 0.0,
        _ => (proj.distance + alpha).powf(-p),
    };
    Ok(WeightRecord {
        x: x.to_vec(),
        delta: proj.distance,
        piece: proj.piece,
        sigma,
        alpha,
        w,
    })
}

/// Per-quadrature-point cache of the Hardy weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyWeight {
    pub p: f64,
    pub records: Vec<WeightRecord>,
}

impl HardyWeight {
    pub fn build(domain: &Domain, partition: &BoundaryPartition, p: f64, points: &[Vec<f64>]) -> Result<Self> {
        check_exponent(p)?;
        if partition.len() != domain.num_pieces() {
            return Err(HardyError::Partition("partition does not match domain".into()));
        }
        let records = points
            .par_iter()
            .map(|x| record_at(domain, partition, p, x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { p, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Multiply every cached weight by `factor`. Only used to inject faults
    /// when exercising the certificate checks.
    pub fn tamper(&mut self, factor: f64) {
        for r in &mut self.records {
            r.w *= factor;
        }
    }
}
