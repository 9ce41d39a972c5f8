//! Uncertainty weights, the per-row constructed beta distribution, and
//! confidence intervals.
//!
//! Each retained data-point gets (i) a multiplicative uncertainty weight in
//! (0, 1] combining the scaled sample size with every uncertainty-variable
//! weight, and (ii) a beta distribution whose mean is the metric value and
//! whose shape is the effective sample size
//!
//! ```text
//! nu = raw_sample_size * prod_j U^j        (raw, not capped/scaled)
//! a  = mu * nu
//! b  = (1 - mu) * nu
//! sd = sqrt(a*b / ((a+b)^2 * (a+b+1)))
//! ```
//!
//! Exact 0/1 metric values are nudged by epsilon before the construction so
//! the error at the bounds is never zero.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::error::{Result, RoamError};
use crate::scaling::ScaledRecord;
use crate::schema::{MetricSchema, UncertaintyVariableSpec};

/// Evenly spaced per-grade weights over the retained grades: the best grade
/// weighs 1, the worst retained grade weighs `minimum_threshold`.
pub fn usability_weights(retained_grades: u32, minimum_threshold: f64) -> Result<Vec<f64>> {
    if retained_grades < 2 {
        return Err(RoamError::config(
            "a graded uncertainty variable needs at least two retained grades",
        ));
    }
    if !(minimum_threshold > 0.0 && minimum_threshold <= 1.0) {
        return Err(RoamError::config(format!(
            "minimum_threshold must be in (0, 1], got {minimum_threshold}"
        )));
    }
    let span = 1.0 - minimum_threshold;
    let steps = (retained_grades - 1) as f64;
    Ok((0..retained_grades)
        .map(|i| 1.0 - i as f64 * span / steps)
        .collect())
}

/// Grade-indexed weight table for one uncertainty variable, covering exactly
/// its retained grades.
pub fn variable_weight_table(spec: &UncertaintyVariableSpec) -> Result<Vec<(u32, f64)>> {
    let retained = spec.retained_grades();
    let weights = usability_weights(retained.len() as u32, spec.minimum_threshold)?;
    Ok(retained.into_iter().zip(weights).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyWeights {
    pub id: usize,
    pub scaled_sample_size: f64,
    /// Per-variable weights in schema declaration order.
    pub variable_weights: Vec<(String, f64)>,
    /// scaled_sample_size times every variable weight, exactly as multiplied.
    pub combined: f64,
}

/// Combine the scaled sample size with every uncertainty-variable weight.
/// Grades are mandatory: a missing grade is a hard error, not a worst case.
pub fn uncertainty_weight(record: &ScaledRecord, schema: &MetricSchema) -> Result<UncertaintyWeights> {
    let scaled_sample_size = schema
        .options
        .sample_size_scaling
        .scale_sample_size(record.raw_sample_size)?;
    let mut variable_weights = Vec::with_capacity(schema.uncertainty_vars.len());
    let mut combined = scaled_sample_size;
    for var in &schema.uncertainty_vars {
        let grade = *record.uncertainty_grades.get(&var.name).ok_or_else(|| {
            RoamError::row(
                record.id,
                format!("uncertainty grade '{}' is missing; grades are mandatory", var.name),
            )
        })?;
        let table = variable_weight_table(var)?;
        let weight = table
            .iter()
            .find(|(g, _)| *g == grade)
            .map(|(_, w)| *w)
            .ok_or_else(|| {
                RoamError::row(
                    record.id,
                    format!("uncertainty variable '{}' has no weight for grade {grade}", var.name),
                )
            })?;
        combined *= weight;
        variable_weights.push((var.name.clone(), weight));
    }
    Ok(UncertaintyWeights {
        id: record.id,
        scaled_sample_size,
        variable_weights,
        combined,
    })
}

/// Beta distribution constructed for one aggregate data-point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcaBeta {
    /// Metric value after the epsilon adjustment at the bounds.
    pub mu: f64,
    /// Effective sample size.
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    pub sd: f64,
}

/// Construct the beta distribution for an aggregate data-point.
///
/// `variable_weights` are the uncertainty-variable weights only; the raw
/// sample size enters unscaled.
pub fn aca_beta(
    metric: f64,
    raw_sample_size: u64,
    variable_weights: &[(String, f64)],
    epsilon: f64,
) -> Result<AcaBeta> {
    if !(0.0..=1.0).contains(&metric) {
        return Err(RoamError::config(format!(
            "metric must be in [0, 1], got {metric}"
        )));
    }
    if raw_sample_size == 0 {
        return Err(RoamError::config("raw sample size must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(RoamError::config(format!(
            "epsilon must be in (0, 0.5), got {epsilon}"
        )));
    }
    let mu = if metric == 0.0 {
        epsilon
    } else if metric == 1.0 {
        1.0 - epsilon
    } else {
        metric
    };
    let mut nu = raw_sample_size as f64;
    for (name, w) in variable_weights {
        if !(*w > 0.0 && *w <= 1.0) {
            return Err(RoamError::config(format!(
                "uncertainty weight '{name}' must be in (0, 1], got {w}"
            )));
        }
        nu *= w;
    }
    let a = mu * nu;
    let b = (1.0 - mu) * nu;
    let num = a * b;
    let sum = a + b;
    let sd = (num / (sum * sum * (sum + 1.0))).sqrt();
    Ok(AcaBeta { mu, nu, a, b, sd })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// Interval construction method. The normal approximation with clamping is
/// the default; exact beta quantiles are available as an option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Normal,
    BetaQuantile,
}

/// Two-sided standard-normal quantile for the given level, e.g. 1.959964 at 0.95.
pub fn two_sided_z(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(RoamError::config(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf((1.0 + level) / 2.0))
}

/// Confidence interval around the (adjusted) mean, clamped to [0, 1].
pub fn confidence_interval(beta: &AcaBeta, level: f64, method: CiMethod) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(RoamError::config(format!(
            "confidence level must be in (0, 1), got {level}"
        )));
    }
    let (lower, upper) = match method {
        CiMethod::Normal => {
            let z = two_sided_z(level)?;
            ((beta.mu - z * beta.sd).max(0.0), (beta.mu + z * beta.sd).min(1.0))
        }
        CiMethod::BetaQuantile => {
            let dist = Beta::new(beta.a, beta.b).map_err(|e| {
                RoamError::config(format!("invalid beta parameters a={}, b={}: {e}", beta.a, beta.b))
            })?;
            let tail = (1.0 - level) / 2.0;
            (
                dist.inverse_cdf(tail).max(0.0),
                dist.inverse_cdf(1.0 - tail).min(1.0),
            )
        }
    };
    Ok(ConfidenceInterval { lower, upper, level })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::schema::tests::worked_example_schema;

    #[test]
    fn usability_table_matches_worked_example() {
        let w = usability_weights(3, 0.6).unwrap();
        assert_eq!(w, vec![1.0, 0.8, 0.6]);
    }

    #[test]
    fn two_retained_grades_hit_the_endpoints() {
        assert_eq!(usability_weights(2, 0.5).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn five_retained_grades_are_evenly_spaced() {
        assert_eq!(
            usability_weights(5, 0.6).unwrap(),
            vec![1.0, 0.9, 0.8, 0.7, 0.6]
        );
    }

    #[test]
    fn removal_grades_drop_out_of_the_table() {
        let spec = UncertaintyVariableSpec {
            name: "usability".into(),
            grade_count: 4,
            minimum_threshold: 0.6,
            removal_grades: std::collections::BTreeSet::from([3]),
        };
        let table = variable_weight_table(&spec).unwrap();
        assert_eq!(table, vec![(0, 1.0), (1, 0.8), (2, 0.6)]);
    }

    fn record_with(n: u64, usability: u32) -> ScaledRecord {
        ScaledRecord {
            id: 1,
            root_values: BTreeMap::new(),
            additional_values: BTreeMap::new(),
            raw_sample_size: n,
            uncertainty_grades: BTreeMap::from([("usability".to_string(), usability)]),
            excluded: false,
            exclusion_reason: None,
        }
    }

    #[test]
    fn combined_weight_is_the_plain_product() {
        let schema = worked_example_schema();
        // scaled sample size 0.5 (n = 100 of cap 200), usability weight 0.8
        let w = uncertainty_weight(&record_with(100, 1), &schema).unwrap();
        assert_eq!(w.scaled_sample_size, 0.5);
        assert_eq!(w.variable_weights, vec![("usability".to_string(), 0.8)]);
        assert_eq!(w.combined, 0.4);
    }

    #[test]
    fn identity_weights_combine_to_one() {
        let schema = worked_example_schema();
        let w = uncertainty_weight(&record_with(200, 0), &schema).unwrap();
        assert_eq!(w.combined, 1.0);
    }

    #[test]
    fn grade_two_contributes_point_six() {
        let schema = worked_example_schema();
        let w = uncertainty_weight(&record_with(200, 2), &schema).unwrap();
        assert_eq!(w.combined, 0.6);
    }

    #[test]
    fn missing_grade_is_a_hard_error() {
        let schema = worked_example_schema();
        let mut record = record_with(100, 0);
        record.uncertainty_grades.clear();
        let err = uncertainty_weight(&record, &schema).unwrap_err();
        assert!(err.to_string().contains("mandatory"));
    }

    #[test]
    fn symmetric_beta_at_half() {
        let beta = aca_beta(0.5, 100, &[], 1e-3).unwrap();
        assert_eq!(beta.a, 50.0);
        assert_eq!(beta.b, 50.0);
        assert!((beta.sd - 0.04975185951049946).abs() < 1e-12);
    }

    #[test]
    fn worked_example_beta() {
        let weights = vec![("usability".to_string(), 0.8)];
        let beta = aca_beta(0.69375, 150, &weights, 1e-3).unwrap();
        assert_eq!(beta.nu, 120.0);
        assert_eq!(beta.a, 83.25);
        assert_eq!(beta.b, 36.75);
        assert!((beta.sd - 0.041904).abs() < 1e-6);
        assert!((beta.a + beta.b - beta.nu).abs() < 1e-12);
    }

    #[test]
    fn zero_metric_keeps_nonzero_error() {
        let beta = aca_beta(0.0, 100, &[], 1e-3).unwrap();
        assert_eq!(beta.mu, 0.001);
        assert!((beta.sd - 0.003145).abs() < 1e-6);
        assert!(beta.sd > 0.0);
    }

    #[test]
    fn one_metric_mirrors_zero() {
        let lo = aca_beta(0.0, 80, &[], 1e-3).unwrap();
        let hi = aca_beta(1.0, 80, &[], 1e-3).unwrap();
        assert!((lo.sd - hi.sd).abs() < 1e-15);
        assert_eq!(hi.mu, 1.0 - 0.001);
    }

    #[test]
    fn interval_matches_worked_example() {
        let weights = vec![("usability".to_string(), 0.8)];
        let beta = aca_beta(0.69375, 150, &weights, 1e-3).unwrap();
        let ci = confidence_interval(&beta, 0.95, CiMethod::Normal).unwrap();
        assert!((ci.lower - 0.61162).abs() < 1e-5);
        assert!((ci.upper - 0.77588).abs() < 1e-5);
    }

    #[test]
    fn lower_bound_clamps_at_zero() {
        let beta = aca_beta(0.0, 100, &[], 1e-3).unwrap();
        let ci = confidence_interval(&beta, 0.95, CiMethod::Normal).unwrap();
        assert_eq!(ci.lower, 0.0);
        assert!(ci.upper > 0.0);
    }

    #[test]
    fn upper_bound_clamps_at_one() {
        let beta = aca_beta(1.0, 100, &[], 1e-3).unwrap();
        let ci = confidence_interval(&beta, 0.95, CiMethod::Normal).unwrap();
        assert_eq!(ci.upper, 1.0);
    }

    #[test]
    fn zero_sd_collapses_the_interval() {
        let beta = AcaBeta {
            mu: 0.4,
            nu: f64::INFINITY,
            a: f64::INFINITY,
            b: f64::INFINITY,
            sd: 0.0,
        };
        let ci = confidence_interval(&beta, 0.95, CiMethod::Normal).unwrap();
        assert_eq!((ci.lower, ci.upper), (0.4, 0.4));
    }

    #[test]
    fn z_matches_the_tabulated_value() {
        let z = two_sided_z(0.95).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-9);
        assert!((z - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn beta_quantile_interval_stays_inside_bounds() {
        let beta = aca_beta(0.69375, 150, &[("usability".to_string(), 0.8)], 1e-3).unwrap();
        let ci = confidence_interval(&beta, 0.95, CiMethod::BetaQuantile).unwrap();
        assert!(ci.lower > 0.0 && ci.upper < 1.0);
        assert!(ci.lower < beta.mu && beta.mu < ci.upper);
        // close to the normal approximation at this nu
        let normal = confidence_interval(&beta, 0.95, CiMethod::Normal).unwrap();
        assert!((ci.lower - normal.lower).abs() < 5e-3);
        assert!((ci.upper - normal.upper).abs() < 5e-3);
    }
}
