//! Output tables: one row per energy level, rendered as CSV or JSON plus
//! per-measure plot companions. Every number is rounded to 12 significant
//! digits at row construction so repeated runs are byte-identical.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Measure, OutputFormat};
use crate::error::Result;

/// Rounds to 12 significant digits, collapsing -0 to 0.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// One table row. Missing cells (measures not requested, residuals a
/// strategy does not track, sector labels the toy model lacks) serialize
/// as empty CSV fields or JSON nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "E")]
    pub energy: f64,
    /// Sector label l as a half-integer, None for the toy pipeline.
    #[serde(rename = "l")]
    pub sector: Option<f64>,
    pub multiplicity: u32,
    pub degenerate: bool,
    pub residual_commutator: Option<f64>,
    pub residual_eigen: Option<f64>,
    pub residual_symmetry: Option<f64>,
    pub concurrence: Option<f64>,
    pub tangle: Option<f64>,
    pub residual_tangle: Option<f64>,
    pub entropy: Option<f64>,
    #[serde(rename = "F_x")]
    pub f_x: Option<f64>,
    #[serde(rename = "F_y")]
    pub f_y: Option<f64>,
    #[serde(rename = "F_z")]
    pub f_z: Option<f64>,
    #[serde(rename = "F_sum")]
    pub f_sum: Option<f64>,
    #[serde(rename = "F_max")]
    pub f_max: Option<f64>,
    pub depth: Option<u32>,
    /// Semicolon-joined warning names, empty when clean.
    pub warnings: String,
}

pub const CSV_HEADER: &str = "E,l,multiplicity,degenerate,residual_commutator,residual_eigen,\
residual_symmetry,concurrence,tangle,residual_tangle,entropy,F_x,F_y,F_z,F_sum,F_max,depth,warnings";

impl ResultRow {
    /// Applies the 12-digit policy to every numeric field.
    pub fn rounded(mut self) -> Self {
        self.energy = round12(self.energy);
        for cell in [
            &mut self.sector,
            &mut self.residual_commutator,
            &mut self.residual_eigen,
            &mut self.residual_symmetry,
            &mut self.concurrence,
            &mut self.tangle,
            &mut self.residual_tangle,
            &mut self.entropy,
            &mut self.f_x,
            &mut self.f_y,
            &mut self.f_z,
            &mut self.f_sum,
            &mut self.f_max,
        ]
        .into_iter()
        .flatten()
        {
            *cell = round12(*cell);
        }
        self
    }
}

/// Shortest round-trip text, switching to exponent form where positional
/// notation would drown the value in zeros.
fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn cell(value: Option<f64>) -> String {
    value.map(num).unwrap_or_default()
}

pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            num(r.energy),
            cell(r.sector),
            r.multiplicity,
            u8::from(r.degenerate),
            cell(r.residual_commutator),
            cell(r.residual_eigen),
            cell(r.residual_symmetry),
            cell(r.concurrence),
            cell(r.tangle),
            cell(r.residual_tangle),
            cell(r.entropy),
            cell(r.f_x),
            cell(r.f_y),
            cell(r.f_z),
            cell(r.f_sum),
            cell(r.f_max),
            r.depth.map(|d| d.to_string()).unwrap_or_default(),
            r.warnings,
        );
    }
    out
}

pub fn render_json(rows: &[ResultRow]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(rows)
        .map_err(|e| crate::error::SpinbootError::InvalidConfig(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes the main table in the requested format.
pub fn write_table(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => render_csv(rows),
        OutputFormat::Json => render_json(rows)?,
    };
    fs::write(path, text)?;
    Ok(())
}

/// The plot series a measure contributes: column name and extractor.
type Series = (&'static str, fn(&ResultRow) -> Option<f64>);

fn series_for(measure: Measure) -> &'static [Series] {
    match measure {
        Measure::Concurrence => &[("concurrence", |r| r.concurrence)],
        Measure::Tangle => &[("tangle", |r| r.tangle)],
        Measure::Residual => &[("residual", |r| r.residual_tangle)],
        Measure::Entropy => &[("entropy", |r| r.entropy)],
        // both scalars of the information matrix get their own file
        Measure::Qfi => &[("qfi_fmax", |r| r.f_max), ("qfi_fsum", |r| r.f_sum)],
    }
}

/// Writes `<stem>.plot.<series>.csv` next to the table for every requested
/// measure; rows without a value for that series are skipped. Returns the
/// paths written, in series order.
pub fn write_plots(
    rows: &[ResultRow],
    measures: &BTreeSet<Measure>,
    table_path: &Path,
) -> Result<Vec<PathBuf>> {
    let stem = table_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    let dir = table_path.parent().unwrap_or_else(|| Path::new(""));
    let mut written = Vec::new();
    for &measure in measures {
        for (name, pick) in series_for(measure) {
            let mut text = String::from("E,l,value\n");
            for r in rows {
                if let Some(v) = pick(r) {
                    let _ = writeln!(text, "{},{},{}", num(r.energy), cell(r.sector), num(v));
                }
            }
            let path = dir.join(format!("{stem}.plot.{name}.csv"));
            fs::write(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}
