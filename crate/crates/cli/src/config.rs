//! JSON run configurations. Every record rejects unknown keys.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hardy_core::mesh::{build_interval_mesh, build_polygon_mesh, build_radial_mesh, default_grade_ratio};
use hardy_core::{BoundaryPartition, Condition, Domain, Mesh, SolverConfig};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    ConvexPolygon { vertices: Vec<[f64; 2]> },
    UnitSquare,
    Ball { dim: usize, radius: f64 },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain, CliError> {
        let d = match self {
            DomainSpec::Interval { a, b } => Domain::interval(*a, *b)?,
            DomainSpec::ConvexPolygon { vertices } => Domain::polygon(vertices.clone())?,
            DomainSpec::UnitSquare => Domain::unit_square(),
            DomainSpec::Ball { dim, radius } => Domain::ball(*dim, *radius)?,
        };
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConditionSpec {
    Dirichlet,
    Robin(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionSpec {
    AllDirichlet,
    AllRobin(f64),
    Pieces(Vec<ConditionSpec>),
}

impl PartitionSpec {
    pub fn build(&self, domain: &Domain) -> Result<BoundaryPartition, CliError> {
        let part = match self {
            PartitionSpec::AllDirichlet => BoundaryPartition::all_dirichlet(domain),
            PartitionSpec::AllRobin(s) => BoundaryPartition::all_robin(domain, *s)?,
            PartitionSpec::Pieces(pieces) => BoundaryPartition::new(
                domain,
                pieces
                    .iter()
                    .map(|c| match *c {
                        ConditionSpec::Dirichlet => Condition::Dirichlet,
                        ConditionSpec::Robin(sigma) => Condition::Robin { sigma },
                    })
                    .collect(),
            )?,
        };
        Ok(part)
    }
}

/// Interval and ball meshes use `cells`; polygons use `h`. Grading goes
/// toward the Dirichlet pieces unless `grade` is false.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub cells: usize,
    pub h: f64,
    pub grade: bool,
    pub grade_ratio: Option<f64>,
    pub grade_depth: Option<f64>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            cells: 2000,
            h: 1.0 / 32.0,
            grade: true,
            grade_ratio: None,
            grade_depth: None,
        }
    }
}

impl MeshSpec {
    pub fn build(&self, domain: &Domain, partition: &BoundaryPartition) -> Result<Mesh, CliError> {
        let toward = if self.grade {
            partition.dirichlet_pieces()
        } else {
            Vec::new()
        };
        let mesh = match domain {
            Domain::Interval { .. } => {
                let ends = toward.len().max(1);
                let ratio = self
                    .grade_ratio
                    .unwrap_or_else(|| default_grade_ratio(self.cells / ends));
                Mesh::Interval(build_interval_mesh(domain, self.cells, ratio, &toward)?)
            }
            Domain::ConvexPolygon { .. } => {
                let depth = self.grade_depth.unwrap_or(domain.inradius()? / 4.0);
                Mesh::Triangles(build_polygon_mesh(domain, self.h, &toward, depth)?)
            }
            _ => build_radial_mesh(domain, self.cells)?,
        };
        Ok(mesh)
    }
}

/// Test hooks that inject faults into an otherwise valid run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultSpec {
    /// Multiplies every weight value, which breaks the certificate check.
    pub tamper_weight: Option<f64>,
    /// Reverses the inequality tested by `verify`.
    pub negate: bool,
}

fn default_seed() -> u64 {
    20240601
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub domain: DomainSpec,
    pub partition: PartitionSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Extra starts with random nodal values drawn from `seed`.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub fault: FaultSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub lemma_cases: usize,
    pub lemma_ps: Vec<f64>,
    pub lemma_tol: f64,
    pub hardy_cases: usize,
    pub hardy_h: f64,
    pub hardy_p: f64,
    pub hardy_tol: f64,
    pub fault: FaultSpec,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            lemma_cases: 200,
            lemma_ps: vec![1.5, 2.0, 3.0],
            lemma_tol: 1e-9,
            hardy_cases: 100,
            hardy_h: 0.125,
            hardy_p: 2.0,
            hardy_tol: 1e-6,
            fault: FaultSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub domain: DomainSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub mesh: MeshSpec,
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorConfig {
    pub dims: Vec<usize>,
    pub ps: Vec<f64>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// `log(rho_max / R)`.
    #[serde(default = "default_log_span")]
    pub log_span: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_true")]
    pub branch_switch: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_radii() -> Vec<f64> {
    vec![1.0]
}

fn default_log_span() -> f64 {
    20.0
}

fn default_cells() -> usize {
    2000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrateConfig {
    pub domain: DomainSpec,
    pub partition: PartitionSpec,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Base mesh; ungraded unless `grade` is set.
    #[serde(default = "coarse_mesh")]
    pub mesh: MeshSpec,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Points at distance below this from the Dirichlet part count as near;
    /// defaults to the inradius.
    #[serde(default)]
    pub split: Option<f64>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn coarse_mesh() -> MeshSpec {
    MeshSpec {
        cells: 20,
        h: 0.125,
        grade: false,
        ..Default::default()
    }
}

fn default_levels() -> usize {
    4
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_forms() {
        let d = Domain::unit_square();
        let p: PartitionSpec =
            serde_json::from_str(r#"{"pieces": ["dirichlet", {"robin": 2.0}, "dirichlet", {"robin": 0}]}"#).unwrap();
        let part = p.build(&d).unwrap();
        assert_eq!(part.dirichlet_pieces(), vec![0, 2]);
        let p: PartitionSpec = serde_json::from_str(r#""all_dirichlet""#).unwrap();
        assert_eq!(p.build(&d).unwrap().dirichlet_pieces().len(), 4);
        let p: PartitionSpec = serde_json::from_str(r#"{"pieces": ["dirichlet"]}"#).unwrap();
        assert!(p.build(&d).is_err());
        assert!(serde_json::from_str::<PartitionSpec>(r#"{"robin": 1.0}"#).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = [
            r#"{"kind": "interval", "a": 0, "b": 1, "c": 2}"#,
            r#"{"kind": "disc", "radius": 1}"#,
        ];
        for b in bad {
            assert!(serde_json::from_str::<DomainSpec>(b).is_err(), "{b}");
        }
        assert!(serde_json::from_str::<MeshSpec>(r#"{"cels": 10}"#).is_err());
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"seeds": 1}"#).is_err());
        assert!(serde_json::from_str::<FaultSpec>(r#"{"tamper": 2}"#).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let c: EstimateConfig =
            serde_json::from_str(r#"{"domain": {"kind": "unit_square"}, "partition": {"all_robin": 1}}"#).unwrap();
        assert_eq!(c.p, 2.0);
        assert_eq!(c.seed, default_seed());
        assert_eq!(c.solver, SolverConfig::default());
        let c: ConcentrateConfig =
            serde_json::from_str(r#"{"domain": {"kind": "interval", "a": 0, "b": 1}, "partition": "all_dirichlet"}"#)
                .unwrap();
        assert_eq!((c.levels, c.mesh.cells, c.mesh.grade), (4, 20, false));
    }

    #[test]
    fn interval_mesh_is_graded_toward_dirichlet_ends() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let part = PartitionSpec::Pieces(vec![ConditionSpec::Dirichlet, ConditionSpec::Robin(1.0)])
            .build(&d)
            .unwrap();
        let spec = MeshSpec {
            cells: 100,
            ..Default::default()
        };
        let Mesh::Interval(m) = spec.build(&d, &part).unwrap() else {
            panic!("expected an interval mesh")
        };
        let first = m.nodes[1] - m.nodes[0];
        let last = m.nodes[100] - m.nodes[99];
        assert!(first < last / 10.0, "{first} {last}");
    }
}
