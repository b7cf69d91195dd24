//! Radial Hardy problems on the exterior of a ball `|x| > R`, truncated at
//! `rho_max` and discretised in `s = log(r / R)`.
//!
//! For `p > n` the profile is free at `rho_max` and continued by a constant
//! beyond it; for `p <= n` it is pinned to zero there (compact support).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HardyError, Result};
use crate::geometry::Domain;
use crate::mesh::{Mesh, RadialLogMesh};
use crate::solver::{minimize_quotient, QuotientProblem, QuotientReport, SolverConfig};
use crate::weights::{check_exponent, BoundaryPartition, Condition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorProblem {
    pub n: usize,
    pub p: f64,
    pub radius: f64,
    pub sigma: f64,
    pub rho_max: f64,
    /// `((p - n) / p) sigma^(1/(p-1))` for `p > n`, otherwise 0.
    pub gamma: f64,
}

impl ExteriorProblem {
    pub fn new(n: usize, p: f64, radius: f64, sigma: f64, rho_max: f64) -> Result<Self> {
        check_exponent(p)?;
        if n < 1 {
            return Err(HardyError::Parameter("dimension must be >= 1".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) || !(rho_max > radius && rho_max.is_finite()) {
            return Err(HardyError::Parameter(format!(
                "need 0 < R < rho_max < inf, got R = {radius}, rho_max = {rho_max}"
            )));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(HardyError::Parameter(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        let nf = n as f64;
        let gamma = if p > nf {
            (p - nf) / p * sigma.powf(1.0 / (p - 1.0))
        } else {
            0.0
        };
        Ok(Self {
            n,
            p,
            radius,
            sigma,
            rho_max,
            gamma,
        })
    }

    pub fn domain(&self) -> Domain {
        Domain::ExteriorBall {
            dim: self.n,
            radius: self.radius,
            truncation: self.rho_max,
        }
    }

    pub fn partition(&self) -> BoundaryPartition {
        BoundaryPartition::new(&self.domain(), vec![Condition::Robin { sigma: self.sigma }]).expect("sigma validated")
    }

    /// True when the profile is pinned to zero at `rho_max`.
    pub fn pins_end(&self) -> bool {
        self.p <= self.n as f64
    }

    /// `log(rho_max / R)`.
    pub fn log_span(&self) -> f64 {
        (self.rho_max / self.radius).ln()
    }

    /// Uniform mesh in `s` with `cells` cells.
    pub fn mesh(&self, cells: usize) -> Result<RadialLogMesh> {
        if cells < 2 {
            return Err(HardyError::Mesh(format!("need at least 2 cells, got {cells}")));
        }
        let span = self.log_span();
        RadialLogMesh::from_nodes(
            (0..=cells).map(|k| span * k as f64 / cells as f64).collect(),
            self.radius,
        )
    }

    pub fn quotient_problem(&self, mesh: &RadialLogMesh) -> Result<QuotientProblem> {
        if (mesh.radius - self.radius).abs() > 1e-12 * self.radius {
            return Err(HardyError::Mesh("mesh radius differs from the problem radius".into()));
        }
        QuotientProblem::new(self.domain(), self.partition(), self.p, Mesh::RadialLog(mesh.clone()))
    }
}

/// `((n - p) / p)^p`, the classical constant for `n > p`.
pub fn classical_exterior_constant(n: usize, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let nf = n as f64;
    if nf <= p {
        return Err(HardyError::OutOfRegime(format!(
            "the classical exterior inequality needs n > p, got n = {n}, p = {p}"
        )));
    }
    Ok((nf - p).powf(p) / p.powf(p))
}

/// `min{((p - n) / p)^p, R^p sigma^(p/(p-1))}` for `p > n`, `sigma > 0`.
pub fn robin_exterior_constant(n: usize, p: f64, sigma: f64, radius: f64) -> Result<f64> {
    check_exponent(p)?;
    let nf = n as f64;
    if p <= nf {
        return Err(HardyError::OutOfRegime(format!(
            "the Robin exterior constant needs p > n, got n = {n}, p = {p}"
        )));
    }
    if !(sigma > 0.0) || !(radius > 0.0) {
        return Err(HardyError::Parameter("sigma and R must be positive".into()));
    }
    Ok(((p - nf).powf(p) / p.powf(p)).min(radius.powf(p) * sigma.powf(p / (p - 1.0))))
}

/// Sigma at which the two branches of [`robin_exterior_constant`] meet:
/// `R^p sigma^(p/(p-1)) = ((p - n) / p)^p`.
pub fn branch_switch_sigma(n: usize, p: f64, radius: f64) -> Result<f64> {
    let nf = n as f64;
    if p <= nf {
        return Err(HardyError::OutOfRegime(
            "the branch switch exists only for p > n".into(),
        ));
    }
    Ok(((p - nf) / (p * radius)).powf(p - 1.0))
}

/// Quotient of a radial profile given by nodal values on `mesh`, piecewise
/// linear in `s`. The sphere-area factor cancels.
pub fn radial_quotient(problem: &ExteriorProblem, mesh: &RadialLogMesh, values: &[f64]) -> Result<f64> {
    if values.len() != mesh.s_nodes.len() {
        return Err(HardyError::NonMatchingMesh);
    }
    if problem.pins_end() && values[values.len() - 1] != 0.0 {
        return Err(HardyError::InfeasibleProfile(
            "for p <= n the profile must vanish at rho_max".into(),
        ));
    }
    let qp = problem.quotient_problem(mesh)?;
    qp.quotient(&qp.field(values.to_vec())?)
}

/// Closed-form quotient of `u_k = (1 - log(|x| / R) / log k)_+` for `p = n`:
/// `(L^(1-n) + sigma R^(n-1)) (n + 1) / L` with `L = log k`.
pub fn uk_quotient(k_log: f64, radius: f64, sigma: f64, n: usize) -> Result<f64> {
    if !(k_log > 0.0) || n < 1 || !(radius > 0.0) || !(sigma >= 0.0) {
        return Err(HardyError::Parameter(
            "need k_log > 0, n >= 1, R > 0, sigma >= 0".into(),
        ));
    }
    let nf = n as f64;
    Ok((k_log.powf(1.0 - nf) + sigma * radius.powf(nf - 1.0)) * (nf + 1.0) / k_log)
}

/// Nodal values of `u_k` on a radial mesh.
pub fn uk_profile(mesh: &RadialLogMesh, k_log: f64) -> Vec<f64> {
    mesh.s_nodes.iter().map(|s| (1.0 - s / k_log).max(0.0)).collect()
}

/// Discrete radial infimum by descent from the constant profile, with the
/// exterior certificate attached.
pub fn brute_force_radial_min(
    problem: &ExteriorProblem,
    mesh: &RadialLogMesh,
    config: &SolverConfig,
) -> Result<QuotientReport> {
    minimize_quotient(&problem.quotient_problem(mesh)?, config)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub p: f64,
    pub sigma: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub rho_max: f64,
    pub estimate: f64,
    pub certificate: Option<f64>,
    pub gap: Option<f64>,
}

/// One radial minimisation per problem, run concurrently; rows keep the
/// order of `problems`.
pub fn exterior_sweep(problems: &[ExteriorProblem], cells: usize, config: &SolverConfig) -> Result<Vec<SweepRow>> {
    problems
        .par_iter()
        .map(|pr| {
            let report = brute_force_radial_min(pr, &pr.mesh(cells)?, config)?;
            Ok(SweepRow {
                n: pr.n,
                p: pr.p,
                sigma: pr.sigma,
                radius: pr.radius,
                rho_max: pr.rho_max,
                estimate: report.lambda_estimate,
                certificate: report.analytic_lower,
                gap: report.analytic_lower.map(|c| report.lambda_estimate - c),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constants() {
        assert_abs_diff_eq!(classical_exterior_constant(3, 2.0).unwrap(), 0.25);
        assert_abs_diff_eq!(classical_exterior_constant(4, 2.0).unwrap(), 1.0);
        assert!(matches!(
            classical_exterior_constant(2, 2.0),
            Err(HardyError::OutOfRegime(_))
        ));
        assert_abs_diff_eq!(
            robin_exterior_constant(2, 3.0, 1.0, 1.0).unwrap(),
            1.0 / 27.0,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            robin_exterior_constant(2, 3.0, 1e12, 1.0).unwrap(),
            1.0 / 27.0,
            epsilon = 1e-16
        );
        assert!(robin_exterior_constant(2, 3.0, 1e-12, 1.0).unwrap() < 1e-15);
        assert!(robin_exterior_constant(3, 2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn branch_switch_is_continuous() {
        let s = branch_switch_sigma(2, 3.0, 1.0).unwrap();
        let lo = robin_exterior_constant(2, 3.0, s * (1.0 - 1e-9), 1.0).unwrap();
        let hi = robin_exterior_constant(2, 3.0, s * (1.0 + 1e-9), 1.0).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 27.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.0 / 27.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.powf(1.5), 1.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_profile_with_tail() {
        // f = 1, p = 3, n = 2: numerator sigma R, denominator int_1^inf r^-2 dr = 1
        let pr = ExteriorProblem::new(2, 3.0, 1.0, 1.0, 20f64.exp()).unwrap();
        let mesh = pr.mesh(200).unwrap();
        let q = radial_quotient(&pr, &mesh, &vec![1.0; 201]).unwrap();
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(
            radial_quotient(&pr, &mesh, &vec![5.0; 201]).unwrap(),
            q,
            epsilon = 1e-12
        );
    }

    #[test]
    fn uk_family() {
        assert_abs_diff_eq!(uk_quotient(10.0, 1.0, 1.0, 2).unwrap(), 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(uk_quotient(100.0, 1.0, 1.0, 2).unwrap(), 0.0303, epsilon = 1e-12);
        assert_abs_diff_eq!(uk_quotient(1000.0, 1.0, 1.0, 2).unwrap(), 0.003003, epsilon = 1e-12);
        for k_log in [10.0f64, 100.0] {
            let pr = ExteriorProblem::new(2, 2.0, 1.0, 1.0, k_log.exp()).unwrap();
            let mesh = pr.mesh(1000).unwrap();
            let q = radial_quotient(&pr, &mesh, &uk_profile(&mesh, k_log)).unwrap();
            assert!((q - uk_quotient(k_log, 1.0, 1.0, 2).unwrap()).abs() < 1e-3, "{q}");
        }
    }

    #[test]
    fn pinned_end_is_enforced() {
        let pr = ExteriorProblem::new(3, 2.0, 1.0, 0.0, 100.0).unwrap();
        let mesh = pr.mesh(10).unwrap();
        assert!(radial_quotient(&pr, &mesh, &[1.0; 11]).is_err());
        assert_eq!(pr.gamma, 0.0);
        let pr = ExteriorProblem::new(2, 3.0, 1.0, 4.0, 100.0).unwrap();
        assert_abs_diff_eq!(pr.gamma, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sweep_rows_keep_order() {
        let cfg = SolverConfig {
            max_iter: 50,
            ..Default::default()
        };
        let problems: Vec<_> = [0.5, 1.0, 4.0]
            .iter()
            .map(|&s| ExteriorProblem::new(2, 3.0, 1.0, s, 1e4).unwrap())
            .collect();
        let rows = exterior_sweep(&problems, 100, &cfg).unwrap();
        assert_eq!(rows.iter().map(|r| r.sigma).collect::<Vec<_>>(), vec![0.5, 1.0, 4.0]);
        for r in &rows {
            assert!(r.gap.unwrap() >= -1e-6);
        }
    }
}
