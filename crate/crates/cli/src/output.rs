use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::MatRef;
use fieldtrial_core::design::{Role, TrialSpec};
use fieldtrial_core::model::FieldLayout;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::format::f9;
use crate::run::DesignSolution;

/// One line of the design CSV. Rows, columns and slots are 1-based; plot
/// coordinates are empty for the between-location phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignRow {
    pub phase: String,
    pub location: String,
    pub plot_row: Option<usize>,
    pub plot_col: Option<usize>,
    pub slot: usize,
    pub genotype: String,
    pub family: String,
    pub role: String,
}

pub fn design_rows(sol: &DesignSolution, spec: &TrialSpec) -> Vec<DesignRow> {
    let layout = sol
        .location
        .as_deref()
        .and_then(|id| spec.location_index(id))
        .and_then(|l| spec.locations[l].layout());
    let mut per_location: BTreeMap<&str, usize> = BTreeMap::new();
    sol.design
        .iter()
        .zip(&sol.unit_location)
        .enumerate()
        .map(|(i, (g, loc))| {
            let gen = spec.genotype_index(g).map(|k| &spec.genotypes[k]);
            let (plot_row, plot_col, slot) = match layout {
                Some(l) => {
                    let (r, c) = l.position(i);
                    (Some(r + 1), Some(c + 1), i + 1)
                }
                None => {
                    let n = per_location.entry(loc).or_insert(0);
                    *n += 1;
                    (None, None, *n)
                }
            };
            DesignRow {
                phase: sol.phase.clone(),
                location: loc.clone(),
                plot_row,
                plot_col,
                slot,
                genotype: g.clone(),
                family: gen.and_then(|g| g.family.clone()).unwrap_or_default(),
                role: gen.map_or("", |g| g.role.name()).into(),
            }
        })
        .collect()
}

pub fn write_design_csv(path: &Path, solutions: &[DesignSolution], spec: &TrialSpec) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for sol in solutions {
        for row in design_rows(sol, spec) {
            w.serialize(row).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_design_csv(path: &Path) -> Result<Vec<DesignRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            _ => unreachable!(),
        },
        _ => CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    }
}

/// `restart,nfe,best_objective,elapsed_seconds`, one line per generation.
pub fn convergence_csv(sol: &DesignSolution) -> String {
    let mut s = String::from("restart,nfe,best_objective,elapsed_seconds\n");
    for r in &sol.trace {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.restart,
            r.nfe,
            f9(r.best_objective),
            f9(r.elapsed_seconds)
        );
    }
    s
}

pub fn convergence_file_name(sol: &DesignSolution) -> String {
    match &sol.location {
        Some(l) => format!("convergence_{}_{}.csv", sol.phase, sanitize(l)),
        None => format!("convergence_{}.csv", sol.phase),
    }
}

/// File-name friendly version of an id.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Solutions as JSON. Floats use the shortest representation that reads
/// back to the same value.
pub fn write_solutions_json(path: &Path, solutions: &[DesignSolution]) -> Result<()> {
    let text = serde_json::to_string_pretty(solutions).map_err(|e| CliError::Other(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_solutions_json(path: &Path) -> Result<Vec<DesignSolution>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Plain-text matrix: a `rows cols` header, then space-separated rows.
pub fn write_matrix(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| f9(m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

const PALETTE: [&str; 10] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5",
    "#d9d9d9", "#bc80bd",
];
const CELL: usize = 28;
const MARGIN: usize = 36;

/// SVG drawing of a field: one cell per plot, filled by family, checks
/// outlined and hatched and labelled with their id.
pub fn render_layout(title: &str, plots: &[String], layout: &FieldLayout, spec: &TrialSpec) -> String {
    let labels = spec.family_labels();
    let names = spec.family_names();
    let width = 2 * MARGIN + layout.cols() * CELL;
    let legend_rows = names.len().min(12);
    let height = 2 * MARGIN + layout.rows() * CELL + 18 * legend_rows;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    s.push_str(concat!(
        r#"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">"#,
        r#"<path d="M0,6 L6,0" stroke="black" stroke-width="1"/></pattern></defs>"#,
        "\n"
    ));
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{}" font-size="14">{}</text>"#,
        MARGIN - 12,
        escape(title)
    );
    for (p, id) in plots.iter().enumerate().take(layout.n_plots()) {
        let (r, c) = layout.position(p);
        let (x, y) = (MARGIN + c * CELL, MARGIN + r * CELL);
        let g = spec.genotype_index(id);
        let fill = g.map_or("#ffffff", |g| PALETTE[labels[g] % PALETTE.len()]);
        let check = g.is_some_and(|g| spec.genotypes[g].role == Role::Check);
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#555" stroke-width="0.5"/>"##
        );
        if check {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="{}" fill="url(#hatch)" stroke="black" stroke-width="2.5"/>"#,
                x + 1,
                y + 1,
                CELL - 2,
                CELL - 2
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="8" text-anchor="middle">{}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 3,
                escape(id)
            );
        }
    }
    let y0 = MARGIN + layout.rows() * CELL + 16;
    for (f, name) in names.iter().enumerate().take(legend_rows) {
        let y = y0 + 18 * f;
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{}" width="12" height="12" fill="{}" stroke="#555" stroke-width="0.5"/><text x="{}" y="{}" font-size="11">{}</text>"##,
            y - 10,
            PALETTE[f % PALETTE.len()],
            MARGIN + 18,
            y,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes design CSV, convergence CSVs, solution JSON and, on request, SVG
/// layouts into `dir`.
pub fn write_all(dir: &Path, solutions: &[DesignSolution], spec: &TrialSpec, render: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_design_csv(&dir.join("design.csv"), solutions, spec)?;
    for sol in solutions {
        write_text(&dir.join(convergence_file_name(sol)), &convergence_csv(sol))?;
        if !render {
            continue;
        }
        let layout = sol
            .location
            .as_deref()
            .and_then(|id| spec.location_index(id))
            .and_then(|l| spec.locations[l].layout());
        if let (Some(layout), Some(loc)) = (layout, &sol.location) {
            let base = sanitize(loc);
            let title = format!("{loc}: start");
            write_text(
                &dir.join(format!("layout_{base}_start.svg")),
                &render_layout(&title, &sol.initial, &layout, spec),
            )?;
            let title = format!("{loc}: optimized");
            write_text(
                &dir.join(format!("layout_{base}.svg")),
                &render_layout(&title, &sol.design, &layout, spec),
            )?;
        }
    }
    write_solutions_json(&dir.join("solution.json"), solutions)
}
