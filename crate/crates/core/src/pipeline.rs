//! End-to-end orchestration: ingest, scale, score, uncertainty, report
//! assembly, and batch what-if re-weighting.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::dataset::{ingest, ColumnMapping, Diagnostic, IngestResult};
use crate::error::{Result, RoamError};
use crate::metric::roam_value;
use crate::report::{EchoCell, RunMeta, ScaledCell, ScoredReport, ScoredReportRow};
use crate::scaling::{scale_record, DatasetStats, ScalingMethod};
use crate::schema::{validate_schema, MetricSchema, WeightSet};
use crate::uncertainty::{aca_beta, confidence_interval, uncertainty_weight};

/// A scored run: the report plus everything worth telling the user about.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRun {
    pub report: ScoredReport,
    pub stats: DatasetStats,
    pub sample_size_range: Option<(u64, u64)>,
    pub diagnostics: Vec<Diagnostic>,
    pub warnings: Vec<String>,
}

/// Run the full pipeline over one data file.
pub fn score_file(
    schema: &MetricSchema,
    mapping: &ColumnMapping,
    data_path: &Path,
    meta: RunMeta,
) -> Result<ScoreRun> {
    let report = validate_schema(schema);
    if !report.is_ok() {
        return Err(RoamError::Validation { report });
    }
    let ingested = ingest(data_path, mapping, schema)?;
    let warnings = advisory_warnings(schema, &ingested);

    let mut rows = Vec::with_capacity(ingested.rows.len());
    for raw in &ingested.rows {
        let record = scale_record(raw, schema, &ingested.stats)?;
        let echo: Vec<EchoCell> = ingested
            .header
            .iter()
            .zip(&raw.echo)
            .map(|(column, value)| EchoCell {
                column: column.clone(),
                value: value.clone(),
            })
            .collect();
        if record.excluded {
            rows.push(ScoredReportRow {
                row: raw.index,
                echo,
                scaled: vec![],
                metric: None,
                uncertainty_weight: None,
                sd: None,
                ci_lower: None,
                ci_upper: None,
                excluded: true,
                exclusion_reason: record.exclusion_reason,
            });
            continue;
        }
        let score = roam_value(&record, schema)?;
        let weights = uncertainty_weight(&record, schema)?;
        let beta = aca_beta(
            score.metric,
            record.raw_sample_size,
            &weights.variable_weights,
            schema.options.epsilon,
        )?;
        let ci = confidence_interval(&beta, schema.options.confidence_level, schema.options.ci_method)?;
        let scaled = schema
            .criteria
            .iter()
            .map(|criterion| {
                let value = record
                    .root_values
                    .get(&criterion.name)
                    .or_else(|| record.additional_values.get(&criterion.name))
                    .copied()
                    .expect("scaled record covers every criterion");
                ScaledCell {
                    criterion: criterion.name.clone(),
                    value,
                }
            })
            .collect();
        rows.push(ScoredReportRow {
            row: raw.index,
            echo,
            scaled,
            metric: Some(score.metric),
            uncertainty_weight: Some(weights.combined),
            sd: Some(beta.sd),
            ci_lower: Some(ci.lower),
            ci_upper: Some(ci.upper),
            excluded: false,
            exclusion_reason: None,
        });
    }

    Ok(ScoreRun {
        report: ScoredReport {
            meta,
            echo_header: ingested.header.clone(),
            criteria: schema.criteria.iter().map(|c| c.name.clone()).collect(),
            rows,
        },
        stats: ingested.stats,
        sample_size_range: ingested.sample_size_range,
        diagnostics: ingested.diagnostics,
        warnings,
    })
}

fn advisory_warnings(schema: &MetricSchema, ingested: &IngestResult) -> Vec<String> {
    let mut warnings = Vec::new();
    if let ScalingMethod::LinearCapped { .. } = schema.options.sample_size_scaling {
        if let Some((min, max)) = ingested.sample_size_range {
            if min >= 1 && max > min.saturating_mul(10) {
                warnings.push(format!(
                    "linear sample-size scaling chosen but the data spans {min}..{max}, more than a multiple of ten; consider logistic_capped"
                ));
            }
        }
    }
    warnings
}

// ---------------------------------------------------------------------------
// What-if re-weighting
// ---------------------------------------------------------------------------

/// One alternative weight set, named after its section in the overrides file.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOverride {
    pub name: String,
    pub weights: WeightSet,
}

/// Load named weight overrides and reject any set the schema validator
/// would reject.
pub fn load_weight_overrides(path: &Path, schema: &MetricSchema) -> Result<Vec<WeightOverride>> {
    let text = std::fs::read_to_string(path).map_err(|e| RoamError::io(path, e))?;
    let sections: BTreeMap<String, BTreeMap<String, f64>> =
        toml::from_str(&text).map_err(|e| RoamError::parse(path, e.to_string()))?;
    if sections.is_empty() {
        return Err(RoamError::parse(path, "no override sections found"));
    }
    let mut overrides = Vec::new();
    for (name, mut entries) in sections {
        let beta0 = entries.remove("beta0").ok_or_else(|| {
            RoamError::parse(path, format!("override '{name}' has no beta0"))
        })?;
        let mut ordered = Vec::new();
        for criterion in schema.additional_criteria() {
            if let Some(w) = entries.remove(&criterion.name) {
                ordered.push((criterion.name.clone(), w));
            }
        }
        for (stray, w) in entries {
            ordered.push((stray, w));
        }
        let weights = WeightSet {
            beta0,
            additional_weights: ordered,
            sum_tolerance: schema.weights.sum_tolerance,
        };
        let mut candidate = schema.clone();
        candidate.weights = weights.clone();
        let report = validate_schema(&candidate);
        if !report.is_ok() {
            let mut report = report;
            report
                .errors
                .insert(0, format!("weight override '{name}' is invalid"));
            return Err(RoamError::Validation { report });
        }
        overrides.push(WeightOverride { name, weights });
    }
    Ok(overrides)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfRow {
    pub row: usize,
    /// Metric under each weight set, baseline first; None when excluded.
    pub metrics: Vec<Option<f64>>,
    /// 1-based rank under each weight set (1 = best, ties broken by row id).
    pub ranks: Vec<Option<usize>>,
    /// rank(baseline) - rank(set), per override; positive means moved up.
    pub rank_changes: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhatIfReport {
    /// "baseline" followed by the override names.
    pub set_names: Vec<String>,
    pub rows: Vec<WhatIfRow>,
}

/// Re-score the dataset under the baseline weights and each override,
/// reporting side-by-side metrics, ranks and rank changes.
pub fn what_if(
    schema: &MetricSchema,
    mapping: &ColumnMapping,
    data_path: &Path,
    overrides: &[WeightOverride],
) -> Result<WhatIfReport> {
    let report = validate_schema(schema);
    if !report.is_ok() {
        return Err(RoamError::Validation { report });
    }
    let ingested = ingest(data_path, mapping, schema)?;
    let records: Vec<_> = ingested
        .rows
        .iter()
        .map(|raw| scale_record(raw, schema, &ingested.stats))
        .collect::<Result<_>>()?;

    let mut set_names = vec!["baseline".to_string()];
    set_names.extend(overrides.iter().map(|o| o.name.clone()));

    let mut schemas = vec![schema.clone()];
    for o in overrides {
        let mut alt = schema.clone();
        alt.weights = o.weights.clone();
        schemas.push(alt);
    }

    // metric per set per record
    let mut per_set_metrics: Vec<Vec<Option<f64>>> = Vec::with_capacity(schemas.len());
    for alt in &schemas {
        let mut metrics = Vec::with_capacity(records.len());
        for record in &records {
            if record.excluded {
                metrics.push(None);
            } else {
                metrics.push(Some(roam_value(record, alt)?.metric));
            }
        }
        per_set_metrics.push(metrics);
    }

    let per_set_ranks: Vec<Vec<Option<usize>>> = per_set_metrics
        .iter()
        .map(|metrics| rank_rows(&records, metrics))
        .collect();

    let rows = records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let metrics: Vec<Option<f64>> = per_set_metrics.iter().map(|m| m[i]).collect();
            let ranks: Vec<Option<usize>> = per_set_ranks.iter().map(|r| r[i]).collect();
            let rank_changes = ranks[1..]
                .iter()
                .map(|r| match (ranks[0], r) {
                    (Some(base), Some(alt)) => Some(base as i64 - *alt as i64),
                    _ => None,
                })
                .collect();
            WhatIfRow {
                row: record.id,
                metrics,
                ranks,
                rank_changes,
            }
        })
        .collect();

    Ok(WhatIfReport { set_names, rows })
}

// Descending by metric, ties broken by ascending row id.
fn rank_rows(
    records: &[crate::scaling::ScaledRecord],
    metrics: &[Option<f64>],
) -> Vec<Option<usize>> {
    let mut order: Vec<(usize, f64, usize)> = records
        .iter()
        .zip(metrics)
        .enumerate()
        .filter_map(|(i, (record, metric))| metric.map(|m| (i, m, record.id)))
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.2.cmp(&b.2)));
    let mut ranks = vec![None; records.len()];
    for (rank, (i, _, _)) in order.into_iter().enumerate() {
        ranks[i] = Some(rank + 1);
    }
    ranks
}

pub fn write_whatif_csv(report: &WhatIfReport, w: impl Write) -> Result<()> {
    let mut out = csv::WriterBuilder::new().from_writer(w);
    let mut header = vec!["row".to_string()];
    for name in &report.set_names {
        header.push(format!("metric_{name}"));
        header.push(format!("rank_{name}"));
    }
    for name in &report.set_names[1..] {
        header.push(format!("rank_change_{name}"));
    }
    out.write_record(&header)
        .map_err(|e| RoamError::config(e.to_string()))?;
    for row in &report.rows {
        let mut record = vec![row.row.to_string()];
        for (metric, rank) in row.metrics.iter().zip(&row.ranks) {
            record.push(metric.map(crate::report::fmt_sig6).unwrap_or_default());
            record.push(rank.map(|r| r.to_string()).unwrap_or_default());
        }
        for change in &row.rank_changes {
            record.push(change.map(|c| c.to_string()).unwrap_or_default());
        }
        out.write_record(&record)
            .map_err(|e| RoamError::config(e.to_string()))?;
    }
    out.flush().map_err(|e| RoamError::io("<writer>", e))?;
    Ok(())
}
