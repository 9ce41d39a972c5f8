//! Report emission: human tabular text and machine record-lines.
//!
//! Output is deterministic byte-for-byte for identical inputs; only the
//! generated-at line differs between runs. Tabular text renders reals with
//! 6 significant digits; record-lines keep full round-trip precision (one
//! self-describing JSON record per line, the first being run metadata).

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RoamError};

pub const TOOL_NAME: &str = "roam";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub schema_hash: String,
    /// Timestamp string; excluded from determinism comparisons.
    pub generated: String,
}

impl RunMeta {
    pub fn new(schema_hash: String, generated: String) -> RunMeta {
        RunMeta {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            schema_hash,
            generated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    TabularText,
    RecordLines,
}

impl FromStr for ReportFormat {
    type Err = RoamError;

    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "table" => Ok(ReportFormat::TabularText),
            "records" => Ok(ReportFormat::RecordLines),
            other => Err(RoamError::config(format!(
                "unknown report format '{other}' (expected 'table' or 'records')"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoCell {
    pub column: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledCell {
    pub criterion: String,
    pub value: f64,
}

/// One output row; present for every input row, excluded or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredReportRow {
    pub row: usize,
    pub echo: Vec<EchoCell>,
    /// Scaled criterion values in schema declaration order; empty when excluded.
    pub scaled: Vec<ScaledCell>,
    pub metric: Option<f64>,
    pub uncertainty_weight: Option<f64>,
    pub sd: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

/// A full scored report ready for emission.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredReport {
    pub meta: RunMeta,
    /// Input columns, in input order.
    pub echo_header: Vec<String>,
    /// Criterion names in schema declaration order.
    pub criteria: Vec<String>,
    pub rows: Vec<ScoredReportRow>,
}

/// Format with 6 significant digits, plain decimal notation.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_tabular(report: &ScoredReport, mut w: impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| RoamError::io("<writer>", e);
    writeln!(w, "# {} {}", report.meta.tool, report.meta.version).map_err(io_err)?;
    writeln!(w, "# schema-hash: {}", report.meta.schema_hash).map_err(io_err)?;
    writeln!(w, "# generated: {}", report.meta.generated).map_err(io_err)?;

    let mut out = csv::WriterBuilder::new().from_writer(vec![]);
    let mut header: Vec<String> = report.echo_header.clone();
    header.extend(report.criteria.iter().map(|c| format!("scaled_{c}")));
    header.extend(
        [
            "metric",
            "uncertainty_weight",
            "sd",
            "ci_lower",
            "ci_upper",
            "excluded",
            "exclusion_reason",
        ]
        .map(String::from),
    );
    out.write_record(&header)
        .map_err(|e| RoamError::config(e.to_string()))?;

    for row in &report.rows {
        let mut record: Vec<String> = row.echo.iter().map(|c| c.value.clone()).collect();
        for name in &report.criteria {
            let cell = row
                .scaled
                .iter()
                .find(|s| &s.criterion == name)
                .map(|s| fmt_sig6(s.value))
                .unwrap_or_default();
            record.push(cell);
        }
        let opt = |v: Option<f64>| v.map(fmt_sig6).unwrap_or_default();
        record.push(opt(row.metric));
        record.push(opt(row.uncertainty_weight));
        record.push(opt(row.sd));
        record.push(opt(row.ci_lower));
        record.push(opt(row.ci_upper));
        record.push(row.excluded.to_string());
        record.push(row.exclusion_reason.clone().unwrap_or_default());
        out.write_record(&record)
            .map_err(|e| RoamError::config(e.to_string()))?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| RoamError::config(e.to_string()))?;
    w.write_all(&bytes).map_err(io_err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine {
    Meta(RunMeta),
    Row(ScoredReportRow),
}

pub fn write_records(report: &ScoredReport, mut w: impl Write) -> Result<()> {
    let io_err = |e: std::io::Error| RoamError::io("<writer>", e);
    let ser = |line: &ReportLine| serde_json::to_string(line).map_err(|e| RoamError::config(e.to_string()));
    writeln!(w, "{}", ser(&ReportLine::Meta(report.meta.clone()))?).map_err(io_err)?;
    for row in &report.rows {
        writeln!(w, "{}", ser(&ReportLine::Row(row.clone()))?).map_err(io_err)?;
    }
    Ok(())
}

pub fn emit_report(report: &ScoredReport, path: &Path, format: ReportFormat) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| RoamError::io(path, e))?;
    let buf = std::io::BufWriter::new(file);
    match format {
        ReportFormat::TabularText => write_tabular(report, buf),
        ReportFormat::RecordLines => write_records(report, buf),
    }
    .map_err(|e| match e {
        RoamError::Io { source, .. } => RoamError::io(path, source),
        other => other,
    })
}

/// Re-ingest an emitted record-lines report with exact value equality.
pub fn read_records(path: &Path) -> Result<(RunMeta, Vec<ScoredReportRow>)> {
    let text = std::fs::read_to_string(path).map_err(|e| RoamError::io(path, e))?;
    let mut meta = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReportLine = serde_json::from_str(line)
            .map_err(|e| RoamError::parse(path, format!("line {}: {e}", i + 1)))?;
        match parsed {
            ReportLine::Meta(m) => meta = Some(m),
            ReportLine::Row(r) => rows.push(r),
        }
    }
    let meta = meta.ok_or_else(|| RoamError::parse(path, "no meta record found"))?;
    Ok((meta, rows))
}

/// Tabular report text with the generated-at line removed, for determinism
/// comparisons.
pub fn strip_generated_line(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# generated:"))
        .map(|l| format!("{l}\n"))
        .collect()
}
