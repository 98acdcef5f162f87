use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fieldtrial::error::exit;
use fieldtrial::format::f9;
use fieldtrial::output;
use fieldtrial::run::{self, Phase, RunConfig};
use fieldtrial::specfile::{parse_spec, SpecFile};
use fieldtrial::{CliError, Result};
use fieldtrial_core::design::{WithinProblem, WithinStart};
use fieldtrial_core::engine::{evolve, Quiet, Strategy};
use fieldtrial_core::model::ObjectiveConfig;
use fieldtrial_core::oracle::exhaustive_best;

#[derive(Parser)]
#[command(name = "fieldtrial", version, about = "PEV-optimal field trial designs by permutation differential evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate experimental genotypes to locations.
    Between(RunArgs),
    /// Lay out each field.
    Within(RunArgs),
    /// Allocate between locations, then lay out each location.
    Both(RunArgs),
    /// Score an existing design CSV.
    Evaluate(EvaluateArgs),
    /// Exhaustive search on a small single-location spec.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Trial specification (TOML).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Population size.
    #[arg(long)]
    np: Option<usize>,
    /// Locality factor in (0, 1].
    #[arg(long)]
    lambda: Option<f64>,
    /// rand3, rand2best or dir2best.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Evaluations per restart.
    #[arg(long)]
    max_evals: Option<usize>,
    /// Number of largest PEV eigenvalues averaged by the objective.
    #[arg(long)]
    k_eigen: Option<usize>,
    /// Score by trace(PEV)/n instead of the largest eigenvalues.
    #[arg(long)]
    full_trace: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG field layouts.
    #[arg(long)]
    render: bool,
    /// Worker threads for objective evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Start design of the within-location phase: clustered_checks,
    /// family_striped or random.
    #[arg(long)]
    start: Option<WithinStart>,
    /// Only lay out this location.
    #[arg(long)]
    location: Option<String>,
    /// Record elapsed wall time in convergence files (makes them differ
    /// between runs).
    #[arg(long)]
    wall_clock: bool,
    /// Write X, Z (and R) of the final designs as text matrices.
    #[arg(long)]
    dump_matrices: bool,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Design CSV as written by a run.
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    k_eigen: Option<usize>,
    #[arg(long)]
    full_trace: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Location to enumerate (default: the only one).
    #[arg(long)]
    location: Option<String>,
}

fn objective(file: &SpecFile, k_eigen: Option<usize>, full_trace: bool) -> ObjectiveConfig {
    if full_trace {
        return ObjectiveConfig::full_trace();
    }
    let mut o = file.objective;
    if let Some(k) = k_eigen {
        o.k_eigen = k;
    }
    o
}

fn load(a: &EngineArgs) -> Result<(SpecFile, fieldtrial_core::engine::EngineConfig, ObjectiveConfig)> {
    let file = parse_spec(&a.spec)?;
    let mut e = file.engine;
    if let Some(v) = a.seed {
        e.seed = v;
    }
    if let Some(v) = a.np {
        e.np = v;
    }
    if let Some(v) = a.lambda {
        e.lambda = v;
    }
    if let Some(v) = a.strategy {
        e.strategy = v;
    }
    if let Some(v) = a.restarts {
        e.restarts = v;
    }
    if let Some(v) = a.max_evals {
        e.max_evals = v;
    }
    let o = objective(&file, a.k_eigen, a.full_trace);
    Ok((file, e, o))
}

fn cmd_run(phase: Phase, a: RunArgs) -> Result<()> {
    let (file, engine, objective) = load(&a.engine)?;
    let cfg = RunConfig {
        phase,
        engine,
        objective,
        start: a.start.unwrap_or(file.start),
        location: a.location,
        output_dir: Some(a.out.clone()),
        render: a.render,
        threads: a.threads,
        wall_clock: a.wall_clock,
        dump_matrices: a.dump_matrices,
        verbose: !a.quiet,
    };
    if cfg.dump_matrices {
        std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    }
    let solutions = run::run(&file.spec, &cfg)?;
    output::write_all(&a.out, &solutions, &file.spec, cfg.render)?;
    for s in &solutions {
        println!(
            "{}{}: objective {} -> {} ({} evaluations{})",
            s.phase,
            s.location.as_ref().map(|l| format!(" {l}")).unwrap_or_default(),
            f9(s.objective_initial),
            f9(s.objective_final),
            s.evaluations,
            if s.kept_start { ", start kept" } else { "" }
        );
    }
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let file = parse_spec(&a.spec)?;
    let obj = objective(&file, a.k_eigen, a.full_trace);
    let rows = output::read_design_csv(&a.design)?;
    let mut groups: BTreeMap<(String, String), Vec<&output::DesignRow>> = BTreeMap::new();
    for r in &rows {
        let key = if r.phase == "between" {
            (r.phase.clone(), String::new())
        } else {
            (r.phase.clone(), r.location.clone())
        };
        groups.entry(key).or_default().push(r);
    }
    for ((phase, loc), mut rows) in groups {
        let loc_index = |id: &str| file.spec.location_index(id).unwrap_or(usize::MAX);
        rows.sort_by_key(|r| (loc_index(&r.location), r.slot));
        let design: Vec<String> = rows.iter().map(|r| r.genotype.clone()).collect();
        let location = (!loc.is_empty()).then_some(loc.as_str());
        let v = run::evaluate_solution(&file.spec, &phase, location, &design, obj)
            .map_err(|e| e.context(format!("{phase} {loc}")))?;
        println!("{phase}{}{} objective {}", if loc.is_empty() { "" } else { " " }, loc, f9(v));
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let (file, engine, objective) = load(&a.engine)?;
    let spec = &file.spec;
    let loc = match &a.location {
        Some(id) => spec
            .location_index(id)
            .ok_or_else(|| CliError::Spec(vec![format!("--location: unknown location {id:?}")]))?,
        None if spec.locations.len() == 1 => 0,
        None => return Err(CliError::Spec(vec!["--location is required with several locations".into()])),
    };
    let problem = WithinProblem::new(spec, loc, &spec.experimentals(), objective)?;
    let best = exhaustive_best(&problem)?;
    let placement = problem.placement(&best.best_perm);
    let ids: Vec<&str> = placement.plots.iter().map(|&g| spec.genotypes[g].id.as_str()).collect();
    println!("exhaustive: {} permutations, best {}", best.evaluated, f9(best.best_value));
    println!("best layout: {}", ids.join(" "));
    let out = evolve(&problem, &engine, &mut Quiet)?;
    let gap = out.best.fitness - best.best_value;
    println!(
        "evolve: best {} after {} evaluations (gap {:e})",
        f9(out.best.fitness),
        out.evaluations,
        gap
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Between(a) => cmd_run(Phase::Between, a),
        Command::Within(a) => cmd_run(Phase::Within, a),
        Command::Both(a) => cmd_run(Phase::Both, a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
