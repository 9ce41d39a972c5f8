//! Tabular ingestion: column mapping, missing-data policies, exclusion
//! rules, and the per-criterion stats pass.
//!
//! Input is comma-separated UTF-8 text with a header row. Empty cells and
//! the literal `NA` are missing markers. Rows get stable 1-based ids in
//! input order. Exclusions (removal grades, drop-row policies) are resolved
//! here, before stats, so an excluded row can never stretch a min-max range.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RoamError};
use crate::scaling::{DatasetStats, RangeStats};
use crate::schema::{MetricSchema, MissingPolicy, ValidationReport};

/// Maps schema names onto data columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMapping {
    /// Column holding the raw sample size (always required).
    pub sample_size: String,
    /// criterion name -> column name
    #[serde(default)]
    pub criteria: BTreeMap<String, String>,
    /// criterion name -> reporting-measure tag column (rubric criteria only)
    #[serde(default)]
    pub measures: BTreeMap<String, String>,
    /// uncertainty variable name -> column name
    #[serde(default)]
    pub uncertainty: BTreeMap<String, String>,
}

impl ColumnMapping {
    /// Every schema criterion and uncertainty variable must resolve to
    /// exactly one column; rubric criteria also need their tag column.
    pub fn validate_against(&self, schema: &MetricSchema) -> ValidationReport {
        let mut report = ValidationReport::default();
        for criterion in &schema.criteria {
            if !self.criteria.contains_key(&criterion.name) {
                report
                    .errors
                    .push(format!("criterion '{}' has no column mapping", criterion.name));
            }
            if criterion.rubric.is_some() && !self.measures.contains_key(&criterion.name) {
                report.errors.push(format!(
                    "criterion '{}' uses a rubric but has no reporting-measure column",
                    criterion.name
                ));
            }
        }
        for name in self.criteria.keys() {
            if schema.criterion(name).is_none() {
                report
                    .errors
                    .push(format!("mapping names unknown criterion '{name}'"));
            }
        }
        for name in self.measures.keys() {
            match schema.criterion(name) {
                None => report
                    .errors
                    .push(format!("measure mapping names unknown criterion '{name}'")),
                Some(c) if c.rubric.is_none() => report.errors.push(format!(
                    "criterion '{name}' has a measure column but no rubric"
                )),
                Some(_) => {}
            }
        }
        for var in &schema.uncertainty_vars {
            if !self.uncertainty.contains_key(&var.name) {
                report.errors.push(format!(
                    "uncertainty variable '{}' has no column mapping",
                    var.name
                ));
            }
        }
        for name in self.uncertainty.keys() {
            if schema.uncertainty_var(name).is_none() {
                report
                    .errors
                    .push(format!("mapping names unknown uncertainty variable '{name}'"));
            }
        }
        report
    }
}

pub fn load_mapping(path: &Path) -> Result<ColumnMapping> {
    let text = std::fs::read_to_string(path).map_err(|e| RoamError::io(path, e))?;
    toml::from_str(&text).map_err(|e| RoamError::parse(path, e.to_string()))
}

/// One parsed criterion cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Missing,
    Number(f64),
    Tagged { measure: String, value: f64 },
}

/// One input row after parsing, before scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    /// 1-based input order.
    pub index: usize,
    /// Original cell text, aligned with the input header.
    pub echo: Vec<String>,
    pub cells: BTreeMap<String, CellValue>,
    pub sample_size: u64,
    pub grades: BTreeMap<String, u32>,
    pub excluded: Option<String>,
}

/// Per-cell note recorded during ingestion (substitutions, drops).
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub row: usize,
    pub column: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}, column '{}': {}", self.row, self.column, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestResult {
    pub header: Vec<String>,
    pub rows: Vec<RawRow>,
    /// Min/max/quartiles per continuous criterion, retained rows only.
    pub stats: DatasetStats,
    /// Raw sample-size range over retained rows.
    pub sample_size_range: Option<(u64, u64)>,
    pub diagnostics: Vec<Diagnostic>,
}

pub fn ingest(path: &Path, mapping: &ColumnMapping, schema: &MetricSchema) -> Result<IngestResult> {
    let report = mapping.validate_against(schema);
    if !report.is_ok() {
        return Err(RoamError::Validation { report });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                RoamError::io(path, std::io::Error::other(e.to_string()))
            }
            _ => RoamError::parse(path, e.to_string()),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| RoamError::parse(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let columns = ColumnIndex::resolve(&header, mapping, schema)?;

    let mut result = IngestResult {
        header,
        ..IngestResult::default()
    };
    let mut stat_values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut n_range: Option<(u64, u64)> = None;

    for (i, record) in reader.records().enumerate() {
        let index = i + 1;
        let record = record.map_err(|e| RoamError::row(index, e.to_string()))?;
        let echo: Vec<String> = record.iter().map(|c| c.to_string()).collect();
        if echo.len() != result.header.len() {
            return Err(RoamError::row(
                index,
                format!(
                    "expected {} cells, found {}",
                    result.header.len(),
                    echo.len()
                ),
            ));
        }
        let row = parse_row(index, echo, &columns, schema, &mut result.diagnostics)?;
        if row.excluded.is_none() {
            for (name, cell) in &row.cells {
                if let CellValue::Number(v) = cell {
                    if schema
                        .criterion(name)
                        .map(|c| c.scaling.needs_stats())
                        .unwrap_or(false)
                    {
                        stat_values.entry(name.clone()).or_default().push(*v);
                    }
                }
            }
            n_range = Some(match n_range {
                None => (row.sample_size, row.sample_size),
                Some((lo, hi)) => (lo.min(row.sample_size), hi.max(row.sample_size)),
            });
        }
        result.rows.push(row);
    }

    for (name, values) in stat_values {
        if let Some(stats) = RangeStats::from_values(&values) {
            result.stats.criteria.insert(name, stats);
        }
    }
    result.sample_size_range = n_range;
    Ok(result)
}

struct ColumnIndex {
    sample_size: usize,
    criteria: Vec<(String, usize)>,
    measures: BTreeMap<String, usize>,
    uncertainty: Vec<(String, usize)>,
}

impl ColumnIndex {
    fn resolve(header: &[String], mapping: &ColumnMapping, schema: &MetricSchema) -> Result<ColumnIndex> {
        let find = |column: &str| -> Result<usize> {
            let mut hits = header.iter().enumerate().filter(|(_, h)| *h == column);
            let first = hits
                .next()
                .ok_or_else(|| {
                    RoamError::config(format!("mapped column '{column}' not found in the data header"))
                })?
                .0;
            if hits.next().is_some() {
                return Err(RoamError::config(format!(
                    "column '{column}' appears more than once in the data header"
                )));
            }
            Ok(first)
        };
        let mut criteria = Vec::new();
        for criterion in &schema.criteria {
            criteria.push((criterion.name.clone(), find(&mapping.criteria[&criterion.name])?));
        }
        let mut measures = BTreeMap::new();
        for (name, column) in &mapping.measures {
            measures.insert(name.clone(), find(column)?);
        }
        let mut uncertainty = Vec::new();
        for var in &schema.uncertainty_vars {
            uncertainty.push((var.name.clone(), find(&mapping.uncertainty[&var.name])?));
        }
        Ok(ColumnIndex {
            sample_size: find(&mapping.sample_size)?,
            criteria,
            measures,
            uncertainty,
        })
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "NA"
}

/// Lenient numeric parse: tolerates a leading `+` and a trailing `%`.
/// Non-finite values count as unparseable.
fn parse_numeric(cell: &str) -> Option<f64> {
    let cleaned = cell.trim().trim_end_matches('%').trim_start_matches('+');
    cleaned.parse().ok().filter(|v: &f64| v.is_finite())
}

fn parse_row(
    index: usize,
    echo: Vec<String>,
    columns: &ColumnIndex,
    schema: &MetricSchema,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<RawRow> {
    let mut row = RawRow {
        index,
        echo,
        cells: BTreeMap::new(),
        sample_size: 0,
        grades: BTreeMap::new(),
        excluded: None,
    };

    // Sample size first: it is the one fixed requirement.
    let cell = row.echo[columns.sample_size].trim();
    row.sample_size = cell.parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        RoamError::row(
            index,
            format!("sample size '{cell}' must be an integer of at least 1"),
        )
    })?;

    // Uncertainty grades: mandatory, and removal grades exclude the row.
    for (name, col) in &columns.uncertainty {
        let var = schema.uncertainty_var(name).expect("validated");
        let cell = row.echo[*col].trim();
        if is_missing(cell) {
            return Err(RoamError::row(
                index,
                format!("uncertainty grade '{name}' is missing; grades are mandatory"),
            ));
        }
        let grade = parse_numeric(cell)
            .filter(|g| g.fract() == 0.0 && *g >= 0.0)
            .map(|g| g as u32)
            .ok_or_else(|| {
                RoamError::row(index, format!("uncertainty grade '{name}' = '{cell}' is not a grade index"))
            })?;
        if grade >= var.grade_count {
            return Err(RoamError::row(
                index,
                format!(
                    "uncertainty grade '{name}' = {grade} outside the scale 0..{}",
                    var.grade_count - 1
                ),
            ));
        }
        if var.removal_grades.contains(&grade) && row.excluded.is_none() {
            row.excluded = Some(format!("{name} grade {grade} is in the removal set"));
        }
        row.grades.insert(name.clone(), grade);
    }
    if row.excluded.is_some() {
        return Ok(row);
    }

    // Criterion cells, applying the per-criterion missing policy.
    for (name, col) in &columns.criteria {
        let criterion = schema.criterion(name).expect("validated");
        let cell = row.echo[*col].trim().to_string();
        let measure_cell = columns
            .measures
            .get(name)
            .map(|mc| row.echo[*mc].trim().to_string());

        let outcome = if is_missing(&cell) {
            Unresolved::Missing
        } else {
            match parse_numeric(&cell) {
                None => Unresolved::Unparseable(cell.clone()),
                Some(value) => match (&criterion.rubric, measure_cell) {
                    (Some(rubric), Some(measure)) => {
                        if is_missing(&measure) {
                            Unresolved::Missing
                        } else if rubric.measure(&measure).is_none() {
                            Unresolved::UnknownMeasure(measure)
                        } else {
                            Unresolved::Value(CellValue::Tagged { measure, value })
                        }
                    }
                    _ => Unresolved::Value(CellValue::Number(value)),
                },
            }
        };

        let cell_value = match outcome {
            Unresolved::Value(v) => v,
            problem => {
                let what = match &problem {
                    Unresolved::Missing => "missing value".to_string(),
                    Unresolved::Unparseable(c) => format!("unparseable value '{c}'"),
                    Unresolved::UnknownMeasure(m) => format!("unknown reporting measure '{m}'"),
                    Unresolved::Value(_) => unreachable!(),
                };
                match criterion.missing_policy {
                    MissingPolicy::Error => {
                        return Err(RoamError::row(index, format!("criterion '{name}': {what}")))
                    }
                    MissingPolicy::DropRow => {
                        diagnostics.push(Diagnostic {
                            row: index,
                            column: name.clone(),
                            message: format!("{what}; row dropped"),
                        });
                        row.excluded = Some(format!("criterion '{name}': {what}"));
                        return Ok(row);
                    }
                    MissingPolicy::WorstCase => {
                        diagnostics.push(Diagnostic {
                            row: index,
                            column: name.clone(),
                            message: format!("{what}; worst case 0 applied"),
                        });
                        CellValue::Missing
                    }
                }
            }
        };
        row.cells.insert(name.clone(), cell_value);
    }
    Ok(row)
}

enum Unresolved {
    Value(CellValue),
    Missing,
    Unparseable(String),
    UnknownMeasure(String),
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;
    use crate::schema::tests::worked_example_schema;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            sample_size: "sample_size".into(),
            criteria: BTreeMap::from([
                ("effectiveness".into(), "outcome_value".into()),
                ("cost".into(), "cost".into()),
                ("politics".into(), "politics".into()),
            ]),
            measures: BTreeMap::new(),
            uncertainty: BTreeMap::from([("usability".into(), "usability".into())]),
        }
    }

    const HEADER: &str = "trial,outcome_value,cost,politics,sample_size,usability\n";

    #[test]
    fn header_only_file_is_an_empty_dataset() {
        let f = write_temp(HEADER);
        let schema = worked_example_schema();
        let result = ingest(f.path(), &mapping(), &schema).unwrap();
        assert!(result.rows.is_empty());
        assert!(result.stats.criteria.is_empty());
        assert_eq!(result.sample_size_range, None);
    }

    #[test]
    fn zero_sample_size_is_a_row_error() {
        let f = write_temp(&format!("{HEADER}A,3,1500,1,0,0\n"));
        let schema = worked_example_schema();
        let err = ingest(f.path(), &mapping(), &schema).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
        assert!(err.to_string().contains("sample size"));
    }

    #[test]
    fn removal_grade_excludes_and_skips_stats() {
        let data = format!("{HEADER}A,3,1500,1,100,0\nB,2,500,1,50,3\nC,1,2500,0,80,1\n");
        let f = write_temp(&data);
        let schema = worked_example_schema();
        let result = ingest(f.path(), &mapping(), &schema).unwrap();
        assert_eq!(result.rows.len(), 3);
        assert!(result.rows[1].excluded.is_some());
        // excluded row's cost 500 must not drag the minimum down
        assert_eq!(result.stats.criteria["cost"].min, 1500.0);
        assert_eq!(result.sample_size_range, Some((80, 100)));
    }

    #[test]
    fn missing_politics_becomes_worst_case() {
        let data = format!("{HEADER}A,3,1500,NA,100,0\nB,2,2000,1,50,0\n");
        let f = write_temp(&data);
        let schema = worked_example_schema();
        let result = ingest(f.path(), &mapping(), &schema).unwrap();
        assert_eq!(result.rows[0].cells["politics"], CellValue::Missing);
        assert_eq!(result.diagnostics.len(), 1);
        assert!(result.diagnostics[0].to_string().contains("worst case"));
    }

    #[test]
    fn missing_cost_under_error_policy_fails() {
        let data = format!("{HEADER}A,3,,1,100,0\n");
        let f = write_temp(&data);
        let schema = worked_example_schema();
        let err = ingest(f.path(), &mapping(), &schema).unwrap_err();
        assert!(err.to_string().contains("cost"));
    }

    #[test]
    fn unmapped_column_is_rejected() {
        let f = write_temp("trial,outcome_value,cost,politics,n,usability\nA,3,1500,1,100,0\n");
        let schema = worked_example_schema();
        let err = ingest(f.path(), &mapping(), &schema).unwrap_err();
        assert!(err.to_string().contains("sample_size"));
    }

    #[test]
    fn duplicate_mapped_column_is_rejected() {
        let f = write_temp("trial,cost,cost,politics,sample_size,usability,outcome_value\nA,1,2,1,100,0,3\n");
        let schema = worked_example_schema();
        let err = ingest(f.path(), &mapping(), &schema).unwrap_err();
        assert!(err.to_string().contains("more than once"));
    }

    #[test]
    fn percent_and_plus_signs_parse() {
        assert_eq!(parse_numeric("+15%"), Some(15.0));
        assert_eq!(parse_numeric("-5"), Some(-5.0));
        assert_eq!(parse_numeric("3.25"), Some(3.25));
        assert_eq!(parse_numeric("decrease"), None);
        assert_eq!(parse_numeric("NaN"), None);
        assert_eq!(parse_numeric("inf"), None);
    }

    #[test]
    fn non_finite_cells_follow_the_missing_policy() {
        // NaN cost under the error policy is a row error, not a panic in
        // the stats pass
        let data = format!("{HEADER}A,3,NaN,1,100,0\n");
        let f = write_temp(&data);
        let schema = worked_example_schema();
        let err = ingest(f.path(), &mapping(), &schema).unwrap_err();
        assert!(err.to_string().contains("unparseable"), "{err}");

        // under worst_case it substitutes like any unparseable cell
        let data = format!("{HEADER}A,3,1500,inf,100,0\nB,2,2000,1,50,0\n");
        let f = write_temp(&data);
        let result = ingest(f.path(), &mapping(), &schema).unwrap();
        assert_eq!(result.rows[0].cells["politics"], CellValue::Missing);
    }

    #[test]
    fn mapping_validation_catches_gaps() {
        let schema = worked_example_schema();
        let mut m = mapping();
        m.criteria.remove("cost");
        m.uncertainty.insert("ghost".into(), "ghost".into());
        let report = m.validate_against(&schema);
        assert!(report.errors.iter().any(|e| e.contains("'cost'")));
        assert!(report.errors.iter().any(|e| e.contains("'ghost'")));
    }
}
