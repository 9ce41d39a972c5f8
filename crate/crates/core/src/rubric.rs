//! Rubrics equate heterogeneous reporting measures on a shared grade scale.
//!
//! A rubric file is comma-separated text with one row per reporting measure
//! and one column per grade. The header names the grades (worst to best);
//! the first cell of each measure row is descriptive text for the lowest
//! grade, the remaining cells are numeric thresholds for grades `1..G-1`.
//! An optional second table (`grade,value` header) assigns uneven scaled
//! values to the grades.

use std::path::Path;

use crate::error::{Result, RoamError};

#[derive(Debug, Clone, PartialEq)]
pub struct Rubric {
    /// Grade labels, worst to best; length is the grade count G.
    pub grade_labels: Vec<String>,
    pub measures: Vec<RubricMeasure>,
    /// Optional per-grade scaled values (uneven spacing), length G.
    pub grade_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RubricMeasure {
    pub name: String,
    /// Minimum (or maximum, when lower is better) raw value for grades 1..G-1.
    pub thresholds: Vec<f64>,
    pub higher_is_better: bool,
}

impl Rubric {
    pub fn grade_count(&self) -> u32 {
        self.grade_labels.len() as u32
    }

    pub fn measure(&self, name: &str) -> Option<&RubricMeasure> {
        self.measures.iter().find(|m| m.name == name)
    }
}

/// Return the highest grade whose threshold the raw observation meets,
/// or grade 0 when none is met.
pub fn grade_with_rubric(rubric: &Rubric, measure: &str, raw: f64) -> Result<u32> {
    let m = rubric
        .measure(measure)
        .ok_or_else(|| RoamError::config(format!("unknown reporting measure '{measure}'")))?;
    let mut grade = 0u32;
    for (i, t) in m.thresholds.iter().enumerate() {
        let met = if m.higher_is_better { raw >= *t } else { raw <= *t };
        if met {
            grade = i as u32 + 1;
        }
    }
    Ok(grade)
}

pub fn load_rubric(path: &Path) -> Result<Rubric> {
    let text = std::fs::read_to_string(path).map_err(|e| RoamError::io(path, e))?;
    parse_rubric(&text).map_err(|e| match e {
        RoamError::Config(message) => RoamError::parse(path, message),
        other => other,
    })
}

pub fn parse_rubric(text: &str) -> Result<Rubric> {
    let lines: Vec<&str> = text.lines().collect();
    let values_at = lines
        .iter()
        .position(|l| l.trim().eq_ignore_ascii_case("grade,value"));
    let (threshold_lines, value_lines) = match values_at {
        Some(i) => (&lines[..i], &lines[i..]),
        None => (&lines[..], &[][..]),
    };

    let mut rows = csv_rows(threshold_lines)?;
    if rows.is_empty() {
        return Err(RoamError::config("rubric has no header row"));
    }
    let header = rows.remove(0);
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("measure") {
        return Err(RoamError::config(
            "rubric header must be 'measure' followed by at least two grade labels",
        ));
    }
    let grade_labels: Vec<String> = header[1..].to_vec();
    let grade_count = grade_labels.len();

    let mut measures = Vec::new();
    for row in rows {
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if row.len() != grade_count + 1 {
            return Err(RoamError::config(format!(
                "measure '{}' has {} cells, expected {} (one per grade)",
                row[0],
                row.len() - 1,
                grade_count
            )));
        }
        let name = row[0].trim().to_string();
        if measures.iter().any(|m: &RubricMeasure| m.name == name) {
            return Err(RoamError::config(format!("duplicate reporting measure '{name}'")));
        }
        // Cell for grade 0 is descriptive only; the rest must be numeric.
        let mut thresholds = Vec::with_capacity(grade_count - 1);
        for cell in &row[2..=grade_count] {
            let v: f64 = cell.trim().parse().map_err(|_| {
                RoamError::config(format!(
                    "measure '{name}': threshold '{cell}' is not numeric"
                ))
            })?;
            thresholds.push(v);
        }
        let higher_is_better = match direction_of(&thresholds) {
            Some(d) => d,
            None => {
                return Err(RoamError::config(format!(
                    "measure '{name}': thresholds must be strictly monotone"
                )))
            }
        };
        measures.push(RubricMeasure {
            name,
            thresholds,
            higher_is_better,
        });
    }
    if measures.is_empty() {
        return Err(RoamError::config("rubric declares no reporting measures"));
    }

    let grade_values = if value_lines.is_empty() {
        None
    } else {
        Some(parse_grade_values(value_lines, grade_count)?)
    };

    Ok(Rubric {
        grade_labels,
        measures,
        grade_values,
    })
}

fn direction_of(thresholds: &[f64]) -> Option<bool> {
    if thresholds.len() < 2 {
        return Some(true);
    }
    if thresholds.windows(2).all(|w| w[0] < w[1]) {
        Some(true)
    } else if thresholds.windows(2).all(|w| w[0] > w[1]) {
        Some(false)
    } else {
        None
    }
}

fn parse_grade_values(lines: &[&str], grade_count: usize) -> Result<Vec<f64>> {
    let mut rows = csv_rows(lines)?;
    rows.remove(0); // grade,value header
    let mut values = vec![None; grade_count];
    for row in rows {
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if row.len() != 2 {
            return Err(RoamError::config("grade value rows must be 'grade,value'"));
        }
        let g: usize = row[0]
            .trim()
            .parse()
            .map_err(|_| RoamError::config(format!("grade '{}' is not an integer", row[0])))?;
        let v: f64 = row[1]
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| RoamError::config(format!("grade value '{}' is not numeric", row[1])))?;
        if g >= grade_count {
            return Err(RoamError::config(format!(
                "grade {g} outside the declared scale 0..{}",
                grade_count - 1
            )));
        }
        values[g] = Some(v);
    }
    let values: Vec<f64> = values
        .into_iter()
        .enumerate()
        .map(|(g, v)| v.ok_or_else(|| RoamError::config(format!("grade {g} has no value"))))
        .collect::<Result<_>>()?;
    if values[0] != 0.0 || values[grade_count - 1] != 1.0 {
        return Err(RoamError::config(
            "grade values must map the worst grade to 0 and the best grade to 1",
        ));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(RoamError::config("grade values must be non-decreasing"));
    }
    Ok(values)
}

fn csv_rows(lines: &[&str]) -> Result<Vec<Vec<String>>> {
    let chunk: String = lines
        .iter()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(chunk.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| RoamError::config(format!("bad rubric line: {e}")))?;
        rows.push(record.iter().map(|c| c.to_string()).collect());
    }
    Ok(rows)
}
