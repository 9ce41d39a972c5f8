//! Homogenization of raw criterion data onto [0, 1].
//!
//! Every scaling method maps raw observations so that 1 implies the maximal
//! metric value. Continuous criteria use min-max variants over the retained
//! rows; graded criteria map their grade scale linearly (or through an
//! explicit per-grade value table); sample sizes use capped linear or
//! capped logistic transforms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{CellValue, RawRow};
use crate::error::{Result, RoamError};
use crate::rubric::grade_with_rubric;
use crate::schema::{MetricSchema, MissingPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingMethod {
    /// (value - min) / (max - min) over the retained rows.
    MinMax {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degenerate_value: Option<f64>,
    },
    /// Min-max followed by `1 - x`, for lower-is-better criteria.
    MinMaxInverted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degenerate_value: Option<f64>,
    },
    /// 1 - (cost - min)/(budget - min), floored at 0 when the budget is breached.
    BudgetCapped { budget: f64 },
    /// Grade g on a 0..G-1 scale maps to g/(G-1), or to the rubric's
    /// per-grade value table when one is declared.
    GradeLinear { grade_count: u32 },
    Constant { value: f64 },
    /// Sample sizes: min(1, n/cap).
    LinearCapped { cap: u64 },
    /// Sample sizes: logistic over log10(n), weight 1 at or above the cap.
    LogisticCapped { cap: u64 },
}

impl ScalingMethod {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ScalingMethod::MinMax { .. } => "min_max",
            ScalingMethod::MinMaxInverted { .. } => "min_max_inverted",
            ScalingMethod::BudgetCapped { .. } => "budget_capped",
            ScalingMethod::GradeLinear { .. } => "grade_linear",
            ScalingMethod::Constant { .. } => "constant",
            ScalingMethod::LinearCapped { .. } => "linear_capped",
            ScalingMethod::LogisticCapped { .. } => "logistic_capped",
        }
    }

    /// True for methods that need a min/max computed from the data.
    pub fn needs_stats(&self) -> bool {
        matches!(
            self,
            ScalingMethod::MinMax { .. }
                | ScalingMethod::MinMaxInverted { .. }
                | ScalingMethod::BudgetCapped { .. }
        )
    }

    /// True for the sample-size family.
    pub fn is_sample_size_kind(&self) -> bool {
        matches!(
            self,
            ScalingMethod::Constant { .. }
                | ScalingMethod::LinearCapped { .. }
                | ScalingMethod::LogisticCapped { .. }
        )
    }

    /// Apply a sample-size method to a raw sample size.
    pub fn scale_sample_size(&self, sample_size: u64) -> Result<f64> {
        match self {
            ScalingMethod::Constant { value } => Ok(*value),
            ScalingMethod::LinearCapped { cap } => linear_sample_scale(sample_size, *cap),
            ScalingMethod::LogisticCapped { cap } => {
                logistic_sample_scale(sample_size, &LogisticParams::new(*cap)?)
            }
            other => Err(RoamError::config(format!(
                "{} is not a sample-size scaling method",
                other.kind_name()
            ))),
        }
    }
}

/// Standard min-max scaling: min maps to 0, max maps to 1.
pub fn minmax_scale(value: f64, min: f64, max: f64) -> Result<f64> {
    if min == max {
        return Err(RoamError::DegenerateRange {
            criterion: String::new(),
        });
    }
    if min > max {
        return Err(RoamError::config(format!(
            "min-max scaling requires min < max, got min {min} > max {max}"
        )));
    }
    Ok((value - min) / (max - min))
}

/// Reflect a scaled value so that lower raw values become better.
pub fn invert(scaled: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&scaled) {
        return Err(RoamError::config(format!(
            "invert expects a value in [0, 1], got {scaled}"
        )));
    }
    Ok(1.0 - scaled)
}

/// Cost scaling against a fixed budget: the budget replaces the data maximum
/// and any cost at or beyond it scores exactly 0.
pub fn budget_capped_scale(cost: f64, min: f64, budget: f64) -> Result<f64> {
    if budget <= min {
        return Err(RoamError::config(format!(
            "budget {budget} must exceed the minimum cost {min}"
        )));
    }
    Ok((1.0 - (cost - min) / (budget - min)).max(0.0))
}

/// Parameters of the capped logistic sample-size transform.
///
/// The curve runs over x = log10(n) with midpoint x0 = x_max/2 and steepness
/// k = 10^-(log10(x_max) - 1), which reduces to k = 10/x_max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub cap: u64,
    pub x_max: f64,
    pub x0: f64,
    pub k: f64,
}

impl LogisticParams {
    pub fn new(cap: u64) -> Result<Self> {
        if cap < 10 {
            return Err(RoamError::config(format!(
                "logistic sample-size scaling requires a cap of at least 10, got {cap}"
            )));
        }
        let x_max = (cap as f64).log10();
        let x0 = x_max / 2.0;
        let k = 10f64.powf(-(x_max.log10() - 1.0));
        Ok(LogisticParams { cap, x_max, x0, k })
    }
}

/// Capped logistic sample-size weight in (0, 1].
pub fn logistic_sample_scale(sample_size: u64, params: &LogisticParams) -> Result<f64> {
    if sample_size == 0 {
        return Err(RoamError::config("sample size must be at least 1"));
    }
    if sample_size >= params.cap {
        return Ok(1.0);
    }
    let x = (sample_size as f64).log10();
    Ok(1.0 / (1.0 + (-params.k * (x - params.x0)).exp()))
}

/// Linear sample-size weight min(1, n/cap).
pub fn linear_sample_scale(sample_size: u64, cap: u64) -> Result<f64> {
    if cap == 0 {
        return Err(RoamError::config("linear sample-size cap must be at least 1"));
    }
    if sample_size == 0 {
        return Err(RoamError::config("sample size must be at least 1"));
    }
    Ok((sample_size as f64 / cap as f64).min(1.0))
}

/// Per-criterion min/max (plus quartiles for outlier inspection), computed
/// over the retained rows only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl RangeStats {
    pub fn from_values(values: &[f64]) -> Option<RangeStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in stats"));
        Some(RangeStats {
            count: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

// Linear interpolation between order statistics (the common spreadsheet rule).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetStats {
    pub criteria: BTreeMap<String, RangeStats>,
}

/// One data-point after homogenization: every criterion value in [0, 1],
/// keyed by criterion name, plus the raw uncertainty inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRecord {
    /// 1-based input order.
    pub id: usize,
    pub root_values: BTreeMap<String, f64>,
    pub additional_values: BTreeMap<String, f64>,
    pub raw_sample_size: u64,
    pub uncertainty_grades: BTreeMap<String, u32>,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
}

/// Scale one ingested row against the schema and the dataset stats.
///
/// Rows already marked excluded pass through untouched (no values are
/// computed for them, so they can never stretch or consume the stats).
pub fn scale_record(row: &RawRow, schema: &MetricSchema, stats: &DatasetStats) -> Result<ScaledRecord> {
    let mut record = ScaledRecord {
        id: row.index,
        root_values: BTreeMap::new(),
        additional_values: BTreeMap::new(),
        raw_sample_size: row.sample_size,
        uncertainty_grades: row.grades.clone(),
        excluded: row.excluded.is_some(),
        exclusion_reason: row.excluded.clone(),
    };
    if record.excluded {
        return Ok(record);
    }

    for criterion in &schema.criteria {
        let cell = row.cells.get(&criterion.name).ok_or_else(|| {
            RoamError::row(row.index, format!("no cell for criterion '{}'", criterion.name))
        })?;
        let scaled = match cell {
            CellValue::Missing => {
                if criterion.missing_policy != MissingPolicy::WorstCase {
                    return Err(RoamError::row(
                        row.index,
                        format!(
                            "criterion '{}' is missing but the row was not resolved at ingest",
                            criterion.name
                        ),
                    ));
                }
                0.0
            }
            CellValue::Number(v) => scale_value(criterion, *v, None, stats, row.index)?,
            CellValue::Tagged { measure, value } => {
                scale_value(criterion, *value, Some(measure), stats, row.index)?
            }
        };
        debug_assert!((0.0..=1.0).contains(&scaled));
        if criterion.role.is_root() {
            record.root_values.insert(criterion.name.clone(), scaled);
        } else {
            record.additional_values.insert(criterion.name.clone(), scaled);
        }
    }
    Ok(record)
}

fn scale_value(
    criterion: &crate::schema::CriterionSpec,
    value: f64,
    measure: Option<&str>,
    stats: &DatasetStats,
    row: usize,
) -> Result<f64> {
    let name = &criterion.name;
    match &criterion.scaling {
        ScalingMethod::MinMax { degenerate_value } => {
            let range = stats.criteria.get(name).ok_or_else(|| {
                RoamError::config(format!("no dataset stats for criterion '{name}'"))
            })?;
            if range.min == range.max {
                return match degenerate_value {
                    Some(c) => Ok(*c),
                    None => Err(RoamError::DegenerateRange {
                        criterion: name.clone(),
                    }),
                };
            }
            minmax_scale(value, range.min, range.max)
        }
        ScalingMethod::MinMaxInverted { degenerate_value } => {
            let range = stats.criteria.get(name).ok_or_else(|| {
                RoamError::config(format!("no dataset stats for criterion '{name}'"))
            })?;
            if range.min == range.max {
                return match degenerate_value {
                    Some(c) => Ok(*c),
                    None => Err(RoamError::DegenerateRange {
                        criterion: name.clone(),
                    }),
                };
            }
            invert(minmax_scale(value, range.min, range.max)?)
        }
        ScalingMethod::BudgetCapped { budget } => {
            let range = stats.criteria.get(name).ok_or_else(|| {
                RoamError::config(format!("no dataset stats for criterion '{name}'"))
            })?;
            budget_capped_scale(value, range.min, *budget)
        }
        ScalingMethod::GradeLinear { grade_count } => {
            let grade = match (measure, &criterion.rubric) {
                (Some(measure), Some(rubric)) => grade_with_rubric(rubric, measure, value)
                    .map_err(|e| RoamError::row(row, format!("criterion '{name}': {e}")))?,
                (None, None) => {
                    if value.fract() != 0.0 || value < 0.0 {
                        return Err(RoamError::row(
                            row,
                            format!("criterion '{name}': '{value}' is not a grade index"),
                        ));
                    }
                    value as u32
                }
                _ => {
                    return Err(RoamError::row(
                        row,
                        format!("criterion '{name}': rubric and measure tag must come together"),
                    ))
                }
            };
            if grade >= *grade_count {
                return Err(RoamError::row(
                    row,
                    format!(
                        "criterion '{name}': grade {grade} outside the declared scale 0..{}",
                        grade_count - 1
                    ),
                ));
            }
            let values = criterion.rubric.as_ref().and_then(|r| r.grade_values.as_ref());
            match values {
                Some(table) => Ok(table[grade as usize]),
                None => Ok(grade as f64 / (*grade_count - 1) as f64),
            }
        }
        ScalingMethod::Constant { value } => Ok(*value),
        other => Err(RoamError::config(format!(
            "criterion '{name}': {} cannot scale criterion data",
            other.kind_name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_midpoint_and_endpoints() {
        assert_eq!(minmax_scale(15.0, 10.0, 20.0).unwrap(), 0.5);
        assert_eq!(minmax_scale(10.0, 10.0, 20.0).unwrap(), 0.0);
        assert_eq!(minmax_scale(20.0, 10.0, 20.0).unwrap(), 1.0);
        // grade 3 on a 0-4 scale
        assert_eq!(minmax_scale(3.0, 0.0, 4.0).unwrap(), 0.75);
    }

    #[test]
    fn minmax_degenerate_and_reversed_ranges() {
        assert!(matches!(
            minmax_scale(1.0, 5.0, 5.0),
            Err(RoamError::DegenerateRange { .. })
        ));
        assert!(matches!(minmax_scale(1.0, 9.0, 5.0), Err(RoamError::Config(_))));
    }

    #[test]
    fn invert_examples() {
        // cost example: min 1000, max 5000, cost 2000 scales to 0.25
        let scaled = minmax_scale(2000.0, 1000.0, 5000.0).unwrap();
        assert_eq!(scaled, 0.25);
        assert_eq!(invert(scaled).unwrap(), 0.75);
        assert_eq!(invert(1.0).unwrap(), 0.0);
        assert_eq!(invert(0.5).unwrap(), 0.5);
        assert!(invert(1.2).is_err());
    }

    #[test]
    fn budget_cap_breach_scores_zero() {
        assert_eq!(budget_capped_scale(4500.0, 1000.0, 4000.0).unwrap(), 0.0);
        assert_eq!(budget_capped_scale(1000.0, 1000.0, 4000.0).unwrap(), 1.0);
        assert_eq!(budget_capped_scale(2500.0, 1000.0, 4000.0).unwrap(), 0.5);
        assert!(budget_capped_scale(1.0, 4000.0, 4000.0).is_err());
    }

    #[test]
    fn logistic_params_for_cap_10000() {
        let p = LogisticParams::new(10_000).unwrap();
        assert_eq!(p.x_max, 4.0);
        assert_eq!(p.x0, 2.0);
        assert!((p.k - 2.5).abs() < 1e-15);
        assert!((p.k - 10.0 / p.x_max).abs() < 1e-12);
    }

    #[test]
    fn logistic_midpoint_cap_and_floor() {
        let p = LogisticParams::new(10_000).unwrap();
        assert_eq!(logistic_sample_scale(100, &p).unwrap(), 0.5);
        assert_eq!(logistic_sample_scale(10_000, &p).unwrap(), 1.0);
        assert_eq!(logistic_sample_scale(20_000, &p).unwrap(), 1.0);
        let tiny = logistic_sample_scale(1, &p).unwrap();
        assert!((tiny - 0.0066928509242848554).abs() < 1e-12);
        // unclamped value just below the cap, and hence the jump height
        let near = logistic_sample_scale(9_999, &p).unwrap();
        assert!((near - 0.9933071490757153).abs() < 1e-4);
    }

    #[test]
    fn logistic_rejects_small_caps() {
        assert!(LogisticParams::new(9).is_err());
        assert!(LogisticParams::new(10).is_ok());
    }

    #[test]
    fn linear_sample_scale_examples() {
        assert_eq!(linear_sample_scale(200, 200).unwrap(), 1.0);
        assert_eq!(linear_sample_scale(100, 200).unwrap(), 0.5);
        assert_eq!(linear_sample_scale(30, 200).unwrap(), 0.15);
        assert_eq!(linear_sample_scale(500, 200).unwrap(), 1.0);
        assert!(linear_sample_scale(0, 200).is_err());
    }

    #[test]
    fn quartiles_use_linear_interpolation() {
        let stats = RangeStats::from_values(&[
            1000.0, 1000.0, 1200.0, 1600.0, 1800.0, 2000.0, 2500.0, 2800.0, 3000.0, 3500.0, 4500.0,
        ])
        .unwrap();
        assert_eq!(stats.min, 1000.0);
        assert_eq!(stats.max, 4500.0);
        assert_eq!(stats.q1, 1400.0);
        assert_eq!(stats.median, 2000.0);
        assert_eq!(stats.q3, 2900.0);
        assert_eq!(stats.iqr(), 1500.0);
    }
}
