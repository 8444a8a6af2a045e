//! gnuplot data and script emission from an aggregate CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};
use crate::output::{read_csv, AggregateRow};

pub const DATA_FILE: &str = "aggregate.dat";
pub const SCRIPT_FILE: &str = "aggregate.gp";

/// Files written by [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub data: PathBuf,
    pub script: PathBuf,
    pub schemes: Vec<String>,
    pub has_bands: bool,
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// Groups rows by scheme in first-appearance order.
fn blocks(rows: &[AggregateRow]) -> Vec<(String, Vec<&AggregateRow>)> {
    let mut out: Vec<(String, Vec<&AggregateRow>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(s, _)| *s == r.scheme) {
            Some((_, v)) => v.push(r),
            None => out.push((r.scheme.clone(), vec![r])),
        }
    }
    out
}

/// Data file text: one block per scheme, separated by two blank lines, with
/// columns `scheme_index round training_size mean ci_lo ci_hi`.
pub fn render_data(rows: &[AggregateRow]) -> String {
    let mut s = String::new();
    for (i, (scheme, block)) in blocks(rows).iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {scheme}");
        for r in block {
            let _ = writeln!(
                s,
                "{i} {} {} {} {} {}",
                r.round,
                r.training_size,
                r.metric_mean,
                num(r.ci_lo),
                num(r.ci_hi)
            );
        }
    }
    s
}

/// Script drawing means as solid lines and, when present, band limits as
/// dashed lines in the same colour.
pub fn render_script(schemes: &[String], has_bands: bool) -> String {
    let mut s = String::new();
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set output 'aggregate.png'\n");
    s.push_str("set xlabel 'training size'\nset ylabel 'metric'\nset key bottom right\n");
    let mut parts = Vec::new();
    for (i, name) in schemes.iter().enumerate() {
        let title = name.replace('\'', "''");
        parts.push(format!(
            "'{DATA_FILE}' index {i} using 3:4 with lines lc {c} dt 1 title '{title}'",
            c = i + 1
        ));
        if has_bands {
            for col in [5, 6] {
                parts.push(format!(
                    "'{DATA_FILE}' index {i} using 3:{col} with lines lc {c} dt 2 notitle",
                    c = i + 1
                ));
            }
        }
    }
    let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    s
}

/// Reads `aggregate` and writes the data file and script into `out_dir`.
pub fn emit_plot_data(aggregate: &Path, out_dir: &Path) -> CliResult<PlotFiles> {
    let rows: Vec<AggregateRow> = read_csv(aggregate)?;
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no aggregate rows", aggregate.display())));
    }
    let schemes: Vec<String> = blocks(&rows).into_iter().map(|(s, _)| s).collect();
    let has_bands = rows.iter().any(|r| r.ci_lo.is_some() && r.ci_hi.is_some());
    std::fs::create_dir_all(out_dir).map_err(CliError::output(out_dir))?;
    let data = out_dir.join(DATA_FILE);
    let script = out_dir.join(SCRIPT_FILE);
    std::fs::write(&data, render_data(&rows)).map_err(CliError::output(&data))?;
    std::fs::write(&script, render_script(&schemes, has_bands)).map_err(CliError::output(&script))?;
    Ok(PlotFiles {
        data,
        script,
        schemes,
        has_bands,
    })
}
