use std::path::PathBuf;

use fieldtrial_core::design::{
    check_spread_summary, family_spread, same_family_adjacencies, spread_imbalance, BetweenAssignment,
    BetweenProblem, FamilySpreadTable, TrialSpec, WithinProblem, WithinStart,
};
use fieldtrial_core::engine::{
    evolve_with, start_rng, Clock, ConvergenceTrace, EngineConfig, NoClock, Permutation,
    PermutationProblem, Progress,
};
use fieldtrial_core::model::{ObjectiveConfig, ObjectiveMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::exec::{AnyExecutor, WallClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Between,
    Within,
    Both,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub phase: Phase,
    pub engine: EngineConfig,
    pub objective: ObjectiveConfig,
    pub start: WithinStart,
    /// Restrict the within-location phase to this location id.
    pub location: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub render: bool,
    pub threads: usize,
    /// Record wall time in traces. Off by default so that repeated runs
    /// produce identical files.
    pub wall_clock: bool,
    pub dump_matrices: bool,
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub restart: usize,
    pub nfe: u64,
    pub best_objective: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadTable {
    pub locations: Vec<String>,
    pub families: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl SpreadTable {
    fn new(t: &FamilySpreadTable, spec: &TrialSpec) -> Self {
        Self {
            locations: spec.locations.iter().map(|l| l.id.clone()).collect(),
            families: t.families.clone(),
            counts: t.counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEcho {
    pub np: usize,
    pub lambda: f64,
    pub strategy: String,
    pub max_evals: usize,
    pub restarts: usize,
    pub k_eigen: usize,
    pub objective_mode: String,
}

/// Design diagnostics of one side (start or final) of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub family_spread: Option<SpreadTable>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spread_imbalance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub check_min_distance: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub check_max_run: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub same_family_adjacencies: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub phase: String,
    /// Location id for the within-location phase.
    pub location: Option<String>,
    pub seed: u64,
    pub engine: EngineEcho,
    pub start: Option<String>,
    /// Location id of every slot (between) or plot (within).
    pub unit_location: Vec<String>,
    /// Genotype id per slot or plot at the start.
    pub initial: Vec<String>,
    /// Genotype id per slot or plot of the returned design.
    pub design: Vec<String>,
    pub objective_initial: f64,
    pub objective_final: f64,
    /// The search found nothing better than the start, which is returned.
    pub kept_start: bool,
    pub evaluations: u64,
    pub ridge_used: Option<f64>,
    pub initial_diagnostics: Diagnostics,
    pub final_diagnostics: Diagnostics,
    pub trace: Vec<TraceRecord>,
}

fn echo(cfg: &RunConfig) -> EngineEcho {
    EngineEcho {
        np: cfg.engine.np,
        lambda: cfg.engine.lambda,
        strategy: cfg.engine.strategy.name().into(),
        max_evals: cfg.engine.max_evals,
        restarts: cfg.engine.restarts,
        k_eigen: cfg.objective.k_eigen,
        objective_mode: match cfg.objective.mode {
            ObjectiveMode::TruncatedEigen => "truncated_eigen".into(),
            ObjectiveMode::FullTrace => "full_trace".into(),
        },
    }
}

struct Searched {
    perm: Permutation,
    objective: f64,
    kept_start: bool,
    trace: ConvergenceTrace,
    evaluations: u64,
}

/// Runs the engine and never returns anything worse than `start`.
fn search<P>(problem: &P, start: &Permutation, start_value: f64, cfg: &RunConfig, label: &str) -> Result<Searched>
where
    P: PermutationProblem + Sync,
{
    if cfg.engine.max_evals == 0 {
        return Ok(Searched {
            perm: start.clone(),
            objective: start_value,
            kept_start: true,
            trace: ConvergenceTrace::default(),
            evaluations: 0,
        });
    }
    let executor = AnyExecutor::with_threads(cfg.threads);
    let clock: Box<dyn Clock> = if cfg.wall_clock {
        Box::new(WallClock::start())
    } else {
        Box::new(NoClock)
    };
    let per_restart = cfg.engine.max_evals as u64;
    let verbose = cfg.verbose;
    let mut sink = |p: &Progress| {
        if verbose && p.nfe % per_restart == 0 {
            eprintln!(
                "{label}: restart {}/{} best {}",
                p.restart + 1,
                cfg.engine.restarts,
                crate::format::f9(p.best_objective)
            );
        }
    };
    let out = evolve_with(problem, &cfg.engine, &executor, &*clock, &mut sink)?;
    let kept_start = !(out.best.fitness <= start_value);
    let (perm, objective) = if kept_start {
        (start.clone(), start_value)
    } else {
        (out.best.perm, out.best.fitness)
    };
    Ok(Searched {
        perm,
        objective,
        kept_start,
        trace: out.trace,
        evaluations: out.evaluations,
    })
}

fn trace_records(t: &ConvergenceTrace) -> Vec<TraceRecord> {
    t.records
        .iter()
        .map(|r| TraceRecord {
            restart: r.restart,
            nfe: r.nfe,
            best_objective: r.best_objective,
            elapsed_seconds: r.elapsed_seconds,
        })
        .collect()
}

fn ids(spec: &TrialSpec, genotypes: &[usize]) -> Vec<String> {
    genotypes.iter().map(|&g| spec.genotypes[g].id.clone()).collect()
}

fn between_diagnostics(a: &BetweenAssignment, spec: &TrialSpec) -> Diagnostics {
    let t = family_spread(a, spec);
    Diagnostics {
        spread_imbalance: Some(spread_imbalance(&t)),
        family_spread: Some(SpreadTable::new(&t, spec)),
        check_min_distance: None,
        check_max_run: None,
        same_family_adjacencies: None,
    }
}

/// Between-location phase.
pub fn run_between(spec: &TrialSpec, cfg: &RunConfig) -> Result<(DesignSolution, BetweenAssignment)> {
    let problem = BetweenProblem::new(spec, cfg.objective)?;
    let start = problem.random_initial(&mut start_rng(cfg.engine.seed))?;
    let start_value = problem.evaluate(&start)?;
    let s = search(&problem, &start, start_value, cfg, "between")?;
    let initial = problem.assignment(&start);
    let fin = problem.assignment(&s.perm);
    let loc_ids: Vec<String> = initial
        .slot_location
        .iter()
        .map(|&l| spec.locations[l].id.clone())
        .collect();
    let sol = DesignSolution {
        phase: "between".into(),
        location: None,
        seed: cfg.engine.seed,
        engine: echo(cfg),
        start: Some("random".into()),
        unit_location: loc_ids,
        initial: ids(spec, &initial.slots),
        design: ids(spec, &fin.slots),
        objective_initial: start_value,
        objective_final: s.objective,
        kept_start: s.kept_start,
        evaluations: s.evaluations,
        ridge_used: problem.ridge_used(),
        initial_diagnostics: between_diagnostics(&initial, spec),
        final_diagnostics: between_diagnostics(&fin, spec),
        trace: trace_records(&s.trace),
    };
    if let Some(dir) = cfg.output_dir.as_ref().filter(|_| cfg.dump_matrices) {
        let d = problem.design_matrices(&s.perm)?;
        crate::output::write_matrix(&dir.join("x_between.txt"), d.x.as_ref())?;
        crate::output::write_matrix(&dir.join("z_between.txt"), d.z.as_ref())?;
    }
    Ok((sol, fin))
}

fn within_diagnostics(problem: &WithinProblem, perm: &Permutation, spec: &TrialSpec) -> Diagnostics {
    let placement = problem.placement(perm);
    let cs = check_spread_summary(&placement.check_mask(spec), problem.layout());
    Diagnostics {
        family_spread: None,
        spread_imbalance: None,
        check_min_distance: cs.min_pairwise_distance,
        check_max_run: Some(cs.max_adjacent_run),
        same_family_adjacencies: Some(same_family_adjacencies(
            &placement.family_labels(spec),
            problem.layout(),
        )),
    }
}

/// Within-location phase for location index `loc` with the given
/// experimental allocation.
pub fn run_within(spec: &TrialSpec, loc: usize, allocation: &[usize], cfg: &RunConfig) -> Result<DesignSolution> {
    let loc_id = spec.locations[loc].id.clone();
    let problem = WithinProblem::new(spec, loc, allocation, cfg.objective)
        .map_err(|e| CliError::from(e).context(format!("location {loc_id}")))?;
    let start = problem.start(cfg.start, spec, &mut start_rng(cfg.engine.seed));
    let start_value = problem.evaluate(&start)?;
    let s = search(&problem, &start, start_value, cfg, &format!("within {loc_id}"))
        .map_err(|e| e.context(format!("location {loc_id}")))?;
    let initial = problem.placement(&start);
    let fin = problem.placement(&s.perm);
    if let Some(dir) = cfg.output_dir.as_ref().filter(|_| cfg.dump_matrices) {
        let d = problem.design_matrices(&s.perm)?;
        let r = fieldtrial_core::model::build_residual(problem.layout(), &spec.residual)?;
        crate::output::write_matrix(&dir.join(format!("x_within_{loc_id}.txt")), d.x.as_ref())?;
        crate::output::write_matrix(&dir.join(format!("z_within_{loc_id}.txt")), d.z.as_ref())?;
        crate::output::write_matrix(&dir.join(format!("r_within_{loc_id}.txt")), r.as_ref())?;
    }
    Ok(DesignSolution {
        phase: "within".into(),
        location: Some(loc_id.clone()),
        seed: cfg.engine.seed,
        engine: echo(cfg),
        start: Some(cfg.start.name().into()),
        unit_location: vec![loc_id; fin.plots.len()],
        initial: ids(spec, &initial.plots),
        design: ids(spec, &fin.plots),
        objective_initial: start_value,
        objective_final: s.objective,
        kept_start: s.kept_start,
        evaluations: s.evaluations,
        ridge_used: problem.ridge_used(),
        initial_diagnostics: within_diagnostics(&problem, &start, spec),
        final_diagnostics: within_diagnostics(&problem, &s.perm, spec),
        trace: trace_records(&s.trace),
    })
}

fn within_locations(spec: &TrialSpec, cfg: &RunConfig) -> Result<Vec<usize>> {
    match &cfg.location {
        Some(id) => spec
            .location_index(id)
            .map(|l| vec![l])
            .ok_or_else(|| CliError::Spec(vec![format!("--location: unknown location {id:?}")])),
        None => Ok((0..spec.locations.len())
            .filter(|&l| spec.locations[l].layout().is_some())
            .collect()),
    }
}

/// Runs the configured phase(s). Without a between-location phase, every
/// experimental must be present at every location.
pub fn run(spec: &TrialSpec, cfg: &RunConfig) -> Result<Vec<DesignSolution>> {
    let mut out = Vec::new();
    let allocation: Box<dyn Fn(usize) -> Vec<usize>> = match cfg.phase {
        Phase::Between => {
            out.push(run_between(spec, cfg)?.0);
            return Ok(out);
        }
        Phase::Both => {
            let (sol, assignment) = run_between(spec, cfg)?;
            out.push(sol);
            Box::new(move |l| assignment.at_location(l))
        }
        Phase::Within => {
            let exp = spec.experimentals();
            if let Some(&g) = exp.iter().find(|&&g| spec.presence_of(g) != spec.locations.len()) {
                return Err(CliError::Spec(vec![format!(
                    "genotypes: {} is not present at every location; run `both` to allocate first",
                    spec.genotypes[g].id
                )]));
            }
            Box::new(move |_| exp.clone())
        }
    };
    let locs = within_locations(spec, cfg)?;
    if locs.is_empty() {
        return Err(CliError::Spec(vec![
            "locations: none has rows/cols for the within-location phase".into(),
        ]));
    }
    for l in locs {
        out.push(run_within(spec, l, &allocation(l), cfg)?);
    }
    Ok(out)
}

/// Objective of a stored design, recomputed from the spec.
pub fn evaluate_solution(spec: &TrialSpec, sol_phase: &str, location: Option<&str>, design: &[String], objective: ObjectiveConfig) -> Result<f64> {
    let index = |id: &String| {
        spec.genotype_index(id)
            .ok_or_else(|| CliError::Other(format!("unknown genotype {id:?} in design")))
    };
    let genotypes = design.iter().map(index).collect::<Result<Vec<_>>>()?;
    match sol_phase {
        "between" => {
            let problem = BetweenProblem::new(spec, objective)?;
            let a = BetweenAssignment {
                slot_location: problem.slots().slot_location().to_vec(),
                slots: genotypes,
            };
            let perm = problem.slots().permutation(&a)?;
            Ok(problem.evaluate(&perm)?)
        }
        "within" => {
            let id = location.ok_or_else(|| CliError::Other("within design without location".into()))?;
            let loc = spec
                .location_index(id)
                .ok_or_else(|| CliError::Other(format!("unknown location {id:?}")))?;
            let allocation: Vec<usize> = genotypes
                .iter()
                .copied()
                .filter(|&g| spec.genotypes[g].role == fieldtrial_core::design::Role::Experimental)
                .collect();
            let problem = WithinProblem::new(spec, loc, &allocation, objective)?;
            let perm = problem.permutation(&fieldtrial_core::design::WithinPlacement { plots: genotypes })?;
            Ok(problem.evaluate(&perm)?)
        }
        other => Err(CliError::Other(format!("unknown phase {other:?}"))),
    }
}
