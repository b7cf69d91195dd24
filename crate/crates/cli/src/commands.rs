use serde::Serialize;

use hardy_core::exterior::{branch_switch_sigma, exterior_sweep, SweepRow};
use hardy_core::mesh::build_polygon_mesh;
use hardy_core::oracles::{
    hardy_full_fuzz, lemma1_fuzz, piece_distance, sigma_limit_probe, theorem2_bound, FuzzSummary,
};
use hardy_core::{
    minimizing_sequence, multi_start, Domain, ExteriorProblem, Mesh, MultiStart, QuotientProblem, QuotientReport,
    Reduction, SolverConfig,
};

use crate::config::{
    load, ConcentrateConfig, EstimateConfig, ExteriorConfig, PartitionSpec, SweepConfig, VerifyConfig,
};
use crate::report::{write_csv, write_json, Meta};
use crate::{CliError, Common, Outcome};

fn required<T: serde::de::DeserializeOwned>(common: &Common, command: &str) -> Result<T, CliError> {
    match &common.config {
        Some(path) => load(path),
        None => Err(CliError::Usage(format!("{command} needs --config <path>"))),
    }
}

fn apply_solver_overrides(common: &Common, solver: &mut SolverConfig) -> Result<(), CliError> {
    if let Some(t) = common.tol {
        solver.rel_tol = t;
    }
    if let Some(m) = common.max_iter {
        solver.max_iter = m;
    }
    solver.validate()?;
    Ok(())
}

fn outcome(violation: bool) -> Outcome {
    if violation {
        Outcome::Violation
    } else {
        Outcome::Ok
    }
}

#[derive(Serialize)]
struct HistoryRow {
    iteration: usize,
    quotient: f64,
}

#[derive(Serialize)]
struct EstimateBody<'a> {
    report: &'a QuotientReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    multi_start: Option<&'a MultiStart>,
}

pub fn estimate(common: &Common) -> Result<Outcome, CliError> {
    let mut cfg: EstimateConfig = required(common, "estimate")?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    apply_solver_overrides(common, &mut cfg.solver)?;
    let domain = cfg.domain.build()?;
    let partition = cfg.partition.build(&domain)?;
    let mesh = cfg.mesh.build(&domain, &partition)?;
    let reduction = if common.sequential {
        Reduction::Sequential
    } else {
        Reduction::Parallel
    };
    let mut problem = QuotientProblem::new(domain, partition, cfg.p, mesh)?.with_reduction(reduction);
    if let Some(f) = cfg.fault.tamper_weight {
        problem.weight.tamper(f);
    }
    let ms = multi_start(&problem, &cfg.solver, cfg.seed, cfg.random_starts)?;
    let report = &ms.best;
    let meta = Meta::new(
        "estimate",
        &cfg,
        cfg.seed,
        common.sequential,
        vec![problem.mesh.summary()],
    )?;
    let body = EstimateBody {
        report,
        multi_start: (cfg.random_starts > 0).then_some(&ms),
    };
    write_json(&common.out.join("report.json"), &meta, &body)?;
    let history: Vec<HistoryRow> = report
        .history
        .iter()
        .enumerate()
        .map(|(iteration, &quotient)| HistoryRow { iteration, quotient })
        .collect();
    write_csv(&common.out.join("history.csv"), &history)?;
    println!(
        "lambda_estimate {} after {} iterations (converged: {}), certificate {:?}",
        report.lambda_estimate, report.iterations, report.converged, report.analytic_lower
    );
    if report.violation {
        eprintln!("certificate violated: estimate below the analytic lower bound");
    }
    Ok(outcome(report.violation))
}

#[derive(Serialize)]
struct VerifyBody {
    passed: bool,
    suites: Vec<FuzzSummary>,
}

pub fn verify(common: &Common) -> Result<Outcome, CliError> {
    let mut cfg: VerifyConfig = match &common.config {
        Some(path) => load(path)?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.tol.is_some() || common.max_iter.is_some() {
        eprintln!("note: --tol and --max-iter do not apply to verify");
    }
    let negate = cfg.fault.negate;
    let suites = vec![
        lemma1_fuzz(cfg.seed, cfg.lemma_cases, &cfg.lemma_ps, cfg.lemma_tol, negate)?,
        hardy_full_fuzz(
            cfg.seed,
            cfg.hardy_cases,
            cfg.hardy_h,
            cfg.hardy_p,
            cfg.hardy_tol,
            negate,
        )?,
    ];
    let square = Mesh::Triangles(build_polygon_mesh(&Domain::unit_square(), cfg.hardy_h, &[], 0.0)?);
    let meta = Meta::new("verify", &cfg, cfg.seed, common.sequential, vec![square.summary()])?;
    let passed = suites.iter().all(|s| s.passed());
    println!("seed {}", cfg.seed);
    for s in &suites {
        println!("{}: {} checks, {} failures", s.suite, s.checks, s.failures.len());
        for f in &s.failures {
            println!(
                "  {}",
                serde_json::to_string(f).map_err(|e| CliError::Io(e.to_string()))?
            );
        }
    }
    write_json(&common.out.join("verify.json"), &meta, &VerifyBody { passed, suites })?;
    Ok(outcome(!passed))
}

#[derive(Serialize)]
struct SweepCsvRow {
    sigma: f64,
    lambda: f64,
    theorem2_bound: f64,
}

#[derive(Serialize)]
struct SweepBody<'a> {
    rows: &'a [SweepCsvRow],
    nonincreasing: bool,
    certified: bool,
}

/// Solves the all-Robin problem for each sigma. The mesh is graded toward
/// every boundary piece so that large sigma is resolved.
pub fn sweep_sigma(common: &Common) -> Result<Outcome, CliError> {
    let mut cfg: SweepConfig = required(common, "sweep-sigma")?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    apply_solver_overrides(common, &mut cfg.solver)?;
    if cfg.sigmas.is_empty() || cfg.sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage(
            "sigmas must be a nonempty list of positive numbers".into(),
        ));
    }
    let domain = cfg.domain.build()?;
    let mesh = cfg.mesh.build(&domain, &PartitionSpec::AllDirichlet.build(&domain)?)?;
    let r_in = domain.inradius()?;
    let table = sigma_limit_probe(&domain, &mesh, cfg.p, &cfg.sigmas, &cfg.solver)?;
    let rows = table
        .iter()
        .map(|&(sigma, lambda)| {
            Ok(SweepCsvRow {
                sigma,
                lambda,
                theorem2_bound: theorem2_bound(cfg.p, r_in, sigma)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let nonincreasing = rows.windows(2).all(|w| w[1].lambda <= w[0].lambda * (1.0 + 1e-9));
    let certified = rows.iter().all(|r| r.lambda >= r.theorem2_bound - 1e-6);
    write_csv(&common.out.join("sweep.csv"), &rows)?;
    let meta = Meta::new("sweep-sigma", &cfg, cfg.seed, common.sequential, vec![mesh.summary()])?;
    write_json(
        &common.out.join("sweep.json"),
        &meta,
        &SweepBody {
            rows: &rows,
            nonincreasing,
            certified,
        },
    )?;
    if !nonincreasing {
        eprintln!("note: lambda is not nonincreasing in sigma");
    }
    if !certified {
        eprintln!("an estimate lies below the in-radius bound");
    }
    Ok(outcome(!certified))
}

#[derive(Serialize)]
struct ExteriorBody<'a> {
    rows: &'a [SweepRow],
    certified: bool,
}

pub fn exterior(common: &Common) -> Result<Outcome, CliError> {
    let mut cfg: ExteriorConfig = required(common, "exterior")?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    apply_solver_overrides(common, &mut cfg.solver)?;
    if !(cfg.log_span > 0.0 && cfg.log_span.is_finite()) {
        return Err(CliError::Usage("log_span must be positive".into()));
    }
    let mut problems = Vec::new();
    for &n in &cfg.dims {
        for &p in &cfg.ps {
            for &r in &cfg.radii {
                let mut sigmas = cfg.sigmas.clone();
                if cfg.branch_switch && p > n as f64 {
                    sigmas.push(branch_switch_sigma(n, p, r)?);
                }
                sigmas.sort_by(f64::total_cmp);
                sigmas.dedup();
                for s in sigmas {
                    problems.push(ExteriorProblem::new(n, p, r, s, r * cfg.log_span.exp())?);
                }
            }
        }
    }
    if problems.is_empty() {
        return Err(CliError::Usage("the parameter grid is empty".into()));
    }
    let rows = exterior_sweep(&problems, cfg.cells, &cfg.solver)?;
    let certified = rows.iter().all(|r| r.gap.is_none_or(|g| g >= -1e-6));
    write_csv(&common.out.join("exterior.csv"), &rows)?;
    let mesh = Mesh::RadialLog(problems[0].mesh(cfg.cells)?);
    let meta = Meta::new("exterior", &cfg, cfg.seed, common.sequential, vec![mesh.summary()])?;
    write_json(
        &common.out.join("exterior.json"),
        &meta,
        &ExteriorBody { rows: &rows, certified },
    )?;
    if !certified {
        eprintln!("an estimate lies below its exterior certificate");
    }
    Ok(outcome(!certified))
}

#[derive(Serialize)]
struct ConcentrateRow {
    level: usize,
    quotient: f64,
    near_energy: f64,
    far_energy: f64,
}

#[derive(Serialize)]
struct ConcentrateBody<'a> {
    split: f64,
    rows: &'a [ConcentrateRow],
    far_energy_decreasing: bool,
    reports: Vec<&'a QuotientReport>,
}

pub fn concentrate(common: &Common) -> Result<Outcome, CliError> {
    let mut cfg: ConcentrateConfig = required(common, "concentrate")?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    apply_solver_overrides(common, &mut cfg.solver)?;
    let domain = cfg.domain.build()?;
    let partition = cfg.partition.build(&domain)?;
    let gamma = partition.dirichlet_pieces();
    if gamma.is_empty() {
        return Err(CliError::Usage("concentrate needs at least one Dirichlet piece".into()));
    }
    let split = match cfg.split {
        Some(s) => s,
        None => domain.inradius()?,
    };
    let base = cfg.mesh.build(&domain, &partition)?;
    let seq = minimizing_sequence(&domain, &partition, cfg.p, base, cfg.levels, &cfg.solver)?;
    let dist = |x: &[f64]| {
        gamma
            .iter()
            .map(|&g| piece_distance(&domain, g, x).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min)
    };
    let mut rows = Vec::new();
    for (level, l) in seq.iter().enumerate() {
        rows.push(ConcentrateRow {
            level,
            quotient: l.quotient,
            near_energy: l.problem.local_energy(l.field(), |x| dist(x) < split)?,
            far_energy: l.problem.local_energy(l.field(), |x| dist(x) >= split)?,
        });
    }
    let far_energy_decreasing = rows.windows(2).all(|w| w[1].far_energy < w[0].far_energy);
    let violation = seq.iter().any(|l| l.report.violation);
    write_csv(&common.out.join("concentrate.csv"), &rows)?;
    let meshes = seq.iter().map(|l| l.problem.mesh.summary()).collect();
    let meta = Meta::new("concentrate", &cfg, cfg.seed, common.sequential, meshes)?;
    write_json(
        &common.out.join("concentrate.json"),
        &meta,
        &ConcentrateBody {
            split,
            rows: &rows,
            far_energy_decreasing,
            reports: seq.iter().map(|l| &l.report).collect(),
        },
    )?;
    Ok(outcome(violation))
}
