//! TOML trial specifications.
//!
//! ```toml
//! presence = 3
//! fixed_effects = "intercept"   # or "per_location", or { per_block = [...] }
//!
//! genotypes = [
//!     { id = "E001", family = "F1", role = "experimental" },
//!     { id = "C1", role = "check" },
//! ]
//!
//! [[locations]]
//! id = "L1"
//! rows = 15
//! cols = 20          # or: plots = 300
//!
//! [check_reps]
//! C1 = 20
//!
//! [kinship]
//! kind = "family_blocks"   # identity | family_blocks | explicit
//! off_diag = 0.5           # path = "kinship.txt" for explicit
//!
//! [residual]
//! rho_r = 0.5
//! rho_c = 0.5
//!
//! [variance]
//! h2 = 0.8                 # or sigma_a2 (and sigma_e2)
//! ```
//!
//! Optional `[engine]`, `[objective]` and `[within]` tables hold run
//! defaults that command-line flags override.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use faer::Mat;
use fieldtrial_core::design::{
    FixedEffects, Genotype, KinshipSource, Location, LocationSize, Role, TrialSpec, WithinStart,
};
use fieldtrial_core::engine::{EngineConfig, Strategy};
use fieldtrial_core::model::{
    FieldLayout, KinshipMatrix, ObjectiveConfig, ObjectiveMode, ResidualModel, VarianceComponents,
    DEFAULT_KINSHIP_RIDGE,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    genotypes: Vec<RawGenotype>,
    #[serde(default)]
    locations: Vec<RawLocation>,
    presence: Option<usize>,
    #[serde(default)]
    check_reps: BTreeMap<String, usize>,
    kinship: Option<RawKinship>,
    residual: Option<RawResidual>,
    variance: Option<RawVariance>,
    fixed_effects: Option<RawFixedEffects>,
    engine: Option<RawEngine>,
    objective: Option<RawObjective>,
    within: Option<RawWithin>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenotype {
    id: String,
    family: Option<String>,
    #[serde(default = "experimental")]
    role: String,
    presence: Option<usize>,
}

fn experimental() -> String {
    "experimental".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocation {
    id: String,
    rows: Option<usize>,
    cols: Option<usize>,
    last_row_cols: Option<usize>,
    plots: Option<usize>,
    check_reps: Option<BTreeMap<String, usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKinship {
    kind: String,
    off_diag: Option<f64>,
    path: Option<PathBuf>,
    ridge: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResidual {
    kind: Option<String>,
    rho_r: Option<f64>,
    rho_c: Option<f64>,
    #[serde(default)]
    nugget: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariance {
    h2: Option<f64>,
    sigma_a2: Option<f64>,
    sigma_e2: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawFixedEffects {
    Named(String),
    Blocks { per_block: Vec<usize> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    np: Option<usize>,
    lambda: Option<f64>,
    strategy: Option<String>,
    max_evals: Option<usize>,
    restarts: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    k_eigen: Option<usize>,
    mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWithin {
    start: Option<String>,
}

/// A parsed spec file: the trial and the run defaults stored with it.
#[derive(Debug, Clone)]
pub struct SpecFile {
    pub spec: TrialSpec,
    pub engine: EngineConfig,
    pub objective: ObjectiveConfig,
    pub start: WithinStart,
}

pub fn parse_spec(path: &Path) -> Result<SpecFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_spec_str(&text, path.parent().unwrap_or(Path::new(".")))
        .map_err(|e| match e {
            CliError::Parse { message, .. } => CliError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
}

/// Parses spec text; relative paths inside resolve against `base`.
pub fn parse_spec_str(text: &str, base: &Path) -> Result<SpecFile> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| CliError::Parse {
        path: PathBuf::from("<spec>"),
        message: e.to_string(),
    })?;
    let mut problems = Vec::new();

    let genotypes = raw
        .genotypes
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let role = match g.role.as_str() {
                "experimental" => Role::Experimental,
                "check" => Role::Check,
                other => {
                    problems.push(format!("genotypes[{i}].role: unknown role {other:?}"));
                    Role::Experimental
                }
            };
            Genotype {
                id: g.id,
                family: g.family,
                role,
                presence: g.presence,
            }
        })
        .collect::<Vec<_>>();

    let mut locations = Vec::new();
    for (i, l) in raw.locations.into_iter().enumerate() {
        let size = match (l.rows, l.cols, l.plots) {
            (Some(r), Some(c), None) => match FieldLayout::new(r, c, l.last_row_cols.unwrap_or(c)) {
                Ok(layout) => LocationSize::Layout(layout),
                Err(fieldtrial_core::Error::InvalidSpec(v)) => {
                    problems.extend(v.into_iter().map(|m| format!("locations[{i}].{m}")));
                    continue;
                }
                Err(e) => return Err(e.into()),
            },
            (None, None, Some(p)) => LocationSize::Plots(p),
            _ => {
                problems.push(format!(
                    "locations[{i}]: give either rows and cols, or plots"
                ));
                continue;
            }
        };
        locations.push(Location {
            id: l.id,
            size,
            check_reps: l.check_reps,
        });
    }

    let (kinship, kinship_ridge) = match raw.kinship {
        None => (KinshipSource::Identity, DEFAULT_KINSHIP_RIDGE),
        Some(k) => {
            let source = match k.kind.as_str() {
                "identity" => KinshipSource::Identity,
                "family_blocks" => match k.off_diag {
                    Some(off_diag) => KinshipSource::FamilyBlocks { off_diag },
                    None => {
                        problems.push("kinship.off_diag: required for family_blocks".into());
                        KinshipSource::Identity
                    }
                },
                "explicit" => match &k.path {
                    Some(p) => KinshipSource::Explicit(read_kinship(&base.join(p))?),
                    None => {
                        problems.push("kinship.path: required for explicit".into());
                        KinshipSource::Identity
                    }
                },
                other => {
                    problems.push(format!("kinship.kind: unknown kind {other:?}"));
                    KinshipSource::Identity
                }
            };
            (source, k.ridge.unwrap_or(DEFAULT_KINSHIP_RIDGE))
        }
    };

    let residual = match raw.residual {
        None => ResidualModel::Identity,
        Some(r) => match r.kind.as_deref() {
            Some("identity") => ResidualModel::Identity,
            None | Some("ar1xar1") => match (r.rho_r, r.rho_c) {
                (Some(rho_r), Some(rho_c)) => ResidualModel::Ar1xAr1 {
                    rho_r,
                    rho_c,
                    nugget: r.nugget,
                },
                _ => {
                    problems.push("residual: rho_r and rho_c are required".into());
                    ResidualModel::Identity
                }
            },
            Some(other) => {
                problems.push(format!("residual.kind: unknown kind {other:?}"));
                ResidualModel::Identity
            }
        },
    };

    let variance = match raw.variance {
        None => {
            problems.push("variance: missing (give h2 or sigma_a2)".into());
            None
        }
        Some(v) => {
            let vc = match (v.h2, v.sigma_a2) {
                (Some(h2), None) if v.sigma_e2.is_none() => VarianceComponents::from_heritability(h2),
                (None, Some(sa)) => VarianceComponents::new(sa, v.sigma_e2.unwrap_or(1.0)),
                _ => Err(fieldtrial_core::Error::InvalidSpec(vec![
                    "variance: give either h2, or sigma_a2 (with optional sigma_e2)".into(),
                ])),
            };
            match vc {
                Ok(vc) => Some(vc),
                Err(fieldtrial_core::Error::InvalidSpec(v)) => {
                    problems.extend(v);
                    None
                }
                Err(e) => return Err(e.into()),
            }
        }
    };

    let fixed_effects = match raw.fixed_effects {
        None => FixedEffects::Intercept,
        Some(RawFixedEffects::Named(n)) => match n.as_str() {
            "intercept" => FixedEffects::Intercept,
            "per_location" => FixedEffects::PerLocation,
            other => {
                problems.push(format!("fixed_effects: unknown value {other:?}"));
                FixedEffects::Intercept
            }
        },
        Some(RawFixedEffects::Blocks { per_block }) => FixedEffects::PerBlock(per_block),
    };

    let engine = engine_config(raw.engine.unwrap_or_default(), &mut problems);
    let objective = objective_config(raw.objective.unwrap_or_default(), &mut problems);
    let start = match raw.within.unwrap_or_default().start {
        None => WithinStart::Random,
        Some(s) => s.parse().unwrap_or_else(|_| {
            problems.push(format!("within.start: unknown start design {s:?}"));
            WithinStart::Random
        }),
    };

    let mut spec = TrialSpec::new(genotypes, locations);
    spec.presence = raw.presence.unwrap_or(1);
    spec.check_reps = raw.check_reps;
    spec.kinship = kinship;
    spec.kinship_ridge = kinship_ridge;
    spec.residual = residual;
    spec.fixed_effects = fixed_effects;
    if let Some(vc) = variance {
        spec.variance = vc;
    }
    if let Err(fieldtrial_core::Error::InvalidSpec(v)) = spec.validate() {
        problems.extend(v);
    }
    if !problems.is_empty() {
        return Err(CliError::Spec(problems));
    }
    Ok(SpecFile {
        spec,
        engine,
        objective,
        start,
    })
}

fn engine_config(raw: RawEngine, problems: &mut Vec<String>) -> EngineConfig {
    let d = EngineConfig::default();
    let strategy = match raw.strategy {
        None => d.strategy,
        Some(s) => s.parse::<Strategy>().unwrap_or_else(|_| {
            problems.push(format!("engine.strategy: unknown strategy {s:?}"));
            d.strategy
        }),
    };
    EngineConfig {
        np: raw.np.unwrap_or(d.np),
        lambda: raw.lambda.unwrap_or(d.lambda),
        strategy,
        max_evals: raw.max_evals.unwrap_or(d.max_evals),
        restarts: raw.restarts.unwrap_or(d.restarts),
        seed: raw.seed.unwrap_or(d.seed),
    }
}

fn objective_config(raw: RawObjective, problems: &mut Vec<String>) -> ObjectiveConfig {
    let mode = match raw.mode.as_deref() {
        None | Some("truncated_eigen") => ObjectiveMode::TruncatedEigen,
        Some("full_trace") => ObjectiveMode::FullTrace,
        Some(other) => {
            problems.push(format!("objective.mode: unknown mode {other:?}"));
            ObjectiveMode::TruncatedEigen
        }
    };
    ObjectiveConfig {
        k_eigen: raw.k_eigen.unwrap_or(ObjectiveConfig::default().k_eigen),
        mode,
    }
}

/// Reads a plain-text matrix: a header line with the size `n`, then `n`
/// rows of `n` whitespace-separated numbers.
pub fn read_kinship(path: &Path) -> Result<KinshipMatrix> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, message: String| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| bad(hl + 1, format!("expected the matrix size, found {header:?}")))?;
    let mut m = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| bad(hl + 2 + i, format!("expected {n} rows, found {i}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != n {
            return Err(bad(ln + 1, format!("expected {n} values, found {}", vals.len())));
        }
        for (j, v) in vals.iter().enumerate() {
            m[(i, j)] = v
                .parse()
                .map_err(|_| bad(ln + 1, format!("column {}: not a number: {v:?}", j + 1)))?;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln + 1, "trailing data after the matrix".into()));
    }
    KinshipMatrix::from_matrix(m).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
genotypes = [
    { id = "a", family = "F1" },
    { id = "b", family = "F1" },
    { id = "c", family = "F2" },
    { id = "k", family = "F2", role = "check" },
]
fixed_effects = "intercept"

[[locations]]
id = "L1"
rows = 1
cols = 5

[check_reps]
k = 2

[kinship]
kind = "family_blocks"
off_diag = 0.5

[residual]
rho_r = 0.5
rho_c = 0.3

[variance]
h2 = 0.5

[engine]
strategy = "dir2best"
np = 6

[within]
start = "family_striped"
"#;

    #[test]
    fn toy_spec() {
        let f = parse_spec_str(TOY, Path::new(".")).unwrap();
        assert_eq!(f.spec.genotypes.len(), 4);
        assert_eq!(f.spec.checks(), vec![3]);
        assert_eq!(f.engine.strategy, Strategy::Dir2Best);
        assert_eq!(f.engine.np, 6);
        assert_eq!(f.start, WithinStart::FamilyStriped);
        assert_eq!(f.spec.variance.sigma_a2(), 1.0);
    }

    #[test]
    fn empty_genotypes_is_a_spec_error() {
        let text = "[[locations]]\nid = \"L\"\nplots = 3\n[variance]\nh2 = 0.5\n";
        match parse_spec_str(text, Path::new(".")) {
            Err(CliError::Spec(v)) => assert!(v.iter().any(|m| m == "genotypes: empty")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_violation_reported() {
        let text = r#"
genotypes = [{ id = "a", role = "maybe" }]
[[locations]]
id = "L"
rows = 2
[kinship]
kind = "pedigree"
[variance]
h2 = 1.5
"#;
        let Err(CliError::Spec(v)) = parse_spec_str(text, Path::new(".")) else {
            panic!()
        };
        assert!(v.iter().any(|m| m.starts_with("genotypes[0].role")));
        assert!(v.iter().any(|m| m.starts_with("locations[0]")));
        assert!(v.iter().any(|m| m.starts_with("kinship.kind")));
        assert!(v.iter().any(|m| m.starts_with("variance.h2")));
    }

    #[test]
    fn malformed_toml_reports_line() {
        let e = parse_spec_str("presence = = 3\n", Path::new(".")).unwrap_err();
        assert!(matches!(&e, CliError::Parse { message, .. } if message.contains("line 1")));
        assert_eq!(e.exit_code(), crate::error::exit::SPEC);
    }
}
