//! The root/additional utility function.
//!
//! For scaled values x^j in [0, 1], the metric for one data-point is
//!
//! ```text
//! metric = (beta0 + sum_j beta_j * x^j_additional) * prod_j x^j_root
//! ```
//!
//! so any root criterion at 0 forces the metric to 0, while additional
//! criteria scale it between the beta0 floor and the root product.

use crate::error::{Result, RoamError};
use crate::scaling::ScaledRecord;
use crate::schema::MetricSchema;

/// Metric value for one data-point, with its two factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoamScore {
    pub id: usize,
    pub metric: f64,
    /// beta0 + weighted additional values, in [beta0, 1].
    pub additive_part: f64,
    /// Product of the root criterion values, in [0, 1].
    pub root_product: f64,
}

/// Evaluate the utility function for one retained record.
///
/// The additive part is summed in criteria declaration order and the root
/// product multiplied in declaration order, so results are identical across
/// runs and platforms.
pub fn roam_value(record: &ScaledRecord, schema: &MetricSchema) -> Result<RoamScore> {
    if record.excluded {
        return Err(RoamError::config(format!(
            "record {} is excluded and cannot be scored",
            record.id
        )));
    }
    let additional_count = schema.additional_criteria().count();
    let root_count = schema.root_criteria().count();
    if record.additional_values.len() != additional_count || record.root_values.len() != root_count
    {
        return Err(RoamError::row(
            record.id,
            format!(
                "record has {} additional and {} root values; schema declares {} and {}",
                record.additional_values.len(),
                record.root_values.len(),
                additional_count,
                root_count
            ),
        ));
    }

    let mut additive = schema.weights.beta0;
    for (name, beta) in &schema.weights.additional_weights {
        let x = fetch(record, &record.additional_values, name)?;
        additive += beta * x;
    }
    let mut product = 1.0;
    for criterion in schema.root_criteria() {
        let x = fetch(record, &record.root_values, &criterion.name)?;
        product *= x;
    }
    Ok(RoamScore {
        id: record.id,
        metric: additive * product,
        additive_part: additive,
        root_product: product,
    })
}

fn fetch(
    record: &ScaledRecord,
    values: &std::collections::BTreeMap<String, f64>,
    name: &str,
) -> Result<f64> {
    let x = *values.get(name).ok_or_else(|| {
        RoamError::row(
            record.id,
            format!("criterion '{name}' is declared in the schema but absent from the record"),
        )
    })?;
    if !(0.0..=1.0).contains(&x) {
        return Err(RoamError::row(
            record.id,
            format!("criterion '{name}' has scaled value {x} outside [0, 1]"),
        ));
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub id: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreOutcome {
    /// One score per retained record, in input order.
    pub scores: Vec<RoamScore>,
    /// Excluded records with their reasons, in input order.
    pub excluded: Vec<Exclusion>,
}

/// Score a whole dataset, reporting exclusions separately.
pub fn score_dataset(records: &[ScaledRecord], schema: &MetricSchema) -> Result<ScoreOutcome> {
    let mut outcome = ScoreOutcome::default();
    for record in records {
        if record.excluded {
            outcome.excluded.push(Exclusion {
                id: record.id,
                reason: record
                    .exclusion_reason
                    .clone()
                    .unwrap_or_else(|| "excluded".to_string()),
            });
            continue;
        }
        outcome.scores.push(roam_value(record, schema)?);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::oracle::brute_force_roam;
    use crate::schema::tests::worked_example_schema;

    fn record(effectiveness: f64, cost: f64, politics: f64) -> ScaledRecord {
        ScaledRecord {
            id: 1,
            root_values: BTreeMap::from([("effectiveness".to_string(), effectiveness)]),
            additional_values: BTreeMap::from([
                ("cost".to_string(), cost),
                ("politics".to_string(), politics),
            ]),
            raw_sample_size: 100,
            uncertainty_grades: BTreeMap::new(),
            excluded: false,
            exclusion_reason: None,
        }
    }

    #[test]
    fn worked_example_value() {
        let schema = worked_example_schema();
        let score = roam_value(&record(0.75, 0.8, 1.0), &schema).unwrap();
        assert!((score.metric - 0.69375).abs() < 1e-15);
        assert_eq!(
            score.metric,
            brute_force_roam(0.5, &[0.375, 0.125], &[0.8, 1.0], &[0.75])
        );
        assert_eq!(score.metric, score.additive_part * score.root_product);
    }

    #[test]
    fn zero_effectiveness_annihilates() {
        let schema = worked_example_schema();
        let score = roam_value(&record(0.0, 0.9, 1.0), &schema).unwrap();
        assert_eq!(score.metric, 0.0);
    }

    #[test]
    fn beta0_floor_when_additional_are_zero() {
        let schema = worked_example_schema();
        let score = roam_value(&record(1.0, 0.0, 0.0), &schema).unwrap();
        assert_eq!(score.metric, 0.5);
        assert_eq!(score.additive_part, 0.5);
    }

    #[test]
    fn empty_dataset_scores_empty() {
        let schema = worked_example_schema();
        let outcome = score_dataset(&[], &schema).unwrap();
        assert!(outcome.scores.is_empty());
        assert!(outcome.excluded.is_empty());
    }

    #[test]
    fn all_root_zero_rows_score_zero() {
        let schema = worked_example_schema();
        let records: Vec<ScaledRecord> = (0..4).map(|_| record(0.0, 0.5, 1.0)).collect();
        let outcome = score_dataset(&records, &schema).unwrap();
        assert!(outcome.scores.iter().all(|s| s.metric == 0.0));
    }

    #[test]
    fn excluded_records_are_reported_not_scored() {
        let schema = worked_example_schema();
        let mut rows = vec![record(1.0, 1.0, 1.0), record(0.5, 0.5, 0.5)];
        rows[1].excluded = true;
        rows[1].exclusion_reason = Some("usability grade 3 is in the removal set".into());
        rows[1].id = 2;
        let outcome = score_dataset(&rows, &schema).unwrap();
        assert_eq!(outcome.scores.len(), 1);
        assert_eq!(outcome.excluded.len(), 1);
        assert_eq!(outcome.excluded[0].id, 2);
    }

    #[test]
    fn missing_criterion_is_reported_with_row_id() {
        let schema = worked_example_schema();
        let mut bad = record(1.0, 1.0, 1.0);
        bad.additional_values.remove("politics");
        let err = roam_value(&bad, &schema).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }
}
