//! Metric schema: criteria, weights, uncertainty variables and global
//! options, with validation of every constraint before any data is touched.
//!
//! The on-disk form is TOML with sections `[[criteria]]`, `[weights]`,
//! `[[uncertainty]]` and `[options]`; see the config reference in the README.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RoamError};
use crate::rubric::{load_rubric, Rubric};
use crate::scaling::ScalingMethod;
use crate::uncertainty::CiMethod;

pub const DEFAULT_SUM_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_CONFIDENCE_LEVEL: f64 = 0.95;
pub const EPSILON_RANGE: (f64, f64) = (1e-9, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionRole {
    Root,
    Additional,
}

impl CriterionRole {
    pub fn is_root(self) -> bool {
        self == CriterionRole::Root
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    WorstCase,
    DropRow,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionSpec {
    pub name: String,
    pub role: CriterionRole,
    pub direction: Direction,
    pub scaling: ScalingMethod,
    #[serde(rename = "missing", default = "default_missing_policy")]
    pub missing_policy: MissingPolicy,
    /// Rubric file path, relative to the schema file. Grade-scaled criteria
    /// whose raw data carries a reporting-measure tag need one.
    #[serde(rename = "rubric", default, skip_serializing_if = "Option::is_none")]
    pub rubric_path: Option<String>,
    #[serde(skip)]
    pub rubric: Option<Rubric>,
}

fn default_missing_policy() -> MissingPolicy {
    MissingPolicy::WorstCase
}

/// The baseline weight plus one weight per additional criterion, kept in
/// criteria declaration order so that summation order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub beta0: f64,
    pub additional_weights: Vec<(String, f64)>,
    pub sum_tolerance: f64,
}

impl WeightSet {
    pub fn new(beta0: f64, additional_weights: Vec<(String, f64)>) -> Self {
        WeightSet {
            beta0,
            additional_weights,
            sum_tolerance: DEFAULT_SUM_TOLERANCE,
        }
    }

    pub fn weight_of(&self, criterion: &str) -> Option<f64> {
        self.additional_weights
            .iter()
            .find(|(name, _)| name == criterion)
            .map(|(_, w)| *w)
    }

    pub fn sum(&self) -> f64 {
        let mut total = self.beta0;
        for (_, w) in &self.additional_weights {
            total += *w;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyVariableSpec {
    pub name: String,
    pub grade_count: u32,
    /// Weight of the worst retained grade, in (0, 1].
    pub minimum_threshold: f64,
    /// Grades whose rows are removed from the dataset entirely.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub removal_grades: BTreeSet<u32>,
}

impl UncertaintyVariableSpec {
    /// Grades that stay in the dataset, best (0) first.
    pub fn retained_grades(&self) -> Vec<u32> {
        (0..self.grade_count)
            .filter(|g| !self.removal_grades.contains(g))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaOptions {
    #[serde(default = "default_sample_size_scaling")]
    pub sample_size_scaling: ScalingMethod,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_confidence_level")]
    pub confidence_level: f64,
    #[serde(default)]
    pub ci_method: CiMethod,
    /// Declared (min, max) raw sample size, used only for validation advice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size_range: Option<(u64, u64)>,
}

fn default_sample_size_scaling() -> ScalingMethod {
    ScalingMethod::Constant { value: 1.0 }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_confidence_level() -> f64 {
    DEFAULT_CONFIDENCE_LEVEL
}

impl Default for SchemaOptions {
    fn default() -> Self {
        SchemaOptions {
            sample_size_scaling: default_sample_size_scaling(),
            epsilon: DEFAULT_EPSILON,
            confidence_level: DEFAULT_CONFIDENCE_LEVEL,
            ci_method: CiMethod::default(),
            sample_size_range: None,
        }
    }
}

/// The full declarative schema. Immutable after load; safe to share
/// read-only across scoring workers.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSchema {
    pub criteria: Vec<CriterionSpec>,
    pub weights: WeightSet,
    pub uncertainty_vars: Vec<UncertaintyVariableSpec>,
    pub options: SchemaOptions,
}

impl MetricSchema {
    pub fn criterion(&self, name: &str) -> Option<&CriterionSpec> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn root_criteria(&self) -> impl Iterator<Item = &CriterionSpec> {
        self.criteria.iter().filter(|c| c.role.is_root())
    }

    pub fn additional_criteria(&self) -> impl Iterator<Item = &CriterionSpec> {
        self.criteria.iter().filter(|c| !c.role.is_root())
    }

    pub fn uncertainty_var(&self, name: &str) -> Option<&UncertaintyVariableSpec> {
        self.uncertainty_vars.iter().find(|v| v.name == name)
    }

    /// Canonical TOML rendering; the schema hash is taken over this string.
    pub fn to_toml_string(&self) -> Result<String> {
        let file = SchemaFile::from_schema(self);
        toml::to_string_pretty(&file)
            .map_err(|e| RoamError::config(format!("cannot serialize schema: {e}")))
    }

    pub fn hash(&self) -> Result<String> {
        let canon = self.to_toml_string()?;
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(digest.len() * 2);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        Ok(hex)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, message: impl Into<String>) {
        self.errors.push(message.into());
    }

    fn warning(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Check every schema invariant. Deterministic and side-effect free; the
/// report is empty of errors iff the schema is usable.
pub fn validate_schema(schema: &MetricSchema) -> ValidationReport {
    let mut report = ValidationReport::default();

    // criteria
    let mut seen = BTreeSet::new();
    for criterion in &schema.criteria {
        if !seen.insert(criterion.name.as_str()) {
            report.error(format!("duplicate criterion name '{}'", criterion.name));
        }
        validate_criterion(criterion, &mut report);
    }
    if schema.root_criteria().next().is_none() {
        report.error("schema declares no root criterion; at least one is required");
    }

    // weights
    validate_weights(schema, &mut report);

    // uncertainty variables
    let mut seen = BTreeSet::new();
    for var in &schema.uncertainty_vars {
        if !seen.insert(var.name.as_str()) {
            report.error(format!("duplicate uncertainty variable '{}'", var.name));
        }
        validate_uncertainty_var(var, &mut report);
    }

    // options
    validate_options(&schema.options, &mut report);

    report
}

fn validate_criterion(criterion: &CriterionSpec, report: &mut ValidationReport) {
    let name = &criterion.name;
    if name.is_empty() {
        report.error("criterion with empty name");
    }
    match (&criterion.scaling, criterion.direction) {
        (ScalingMethod::MinMax { .. } | ScalingMethod::GradeLinear { .. }, Direction::LowerIsBetter) => {
            report.error(format!(
                "criterion '{name}': {} scaling maps higher raw values to better scores; declare it higher_is_better or use an inverted method",
                criterion.scaling.kind_name()
            ));
        }
        (
            ScalingMethod::MinMaxInverted { .. } | ScalingMethod::BudgetCapped { .. },
            Direction::HigherIsBetter,
        ) => {
            report.error(format!(
                "criterion '{name}': {} scaling maps lower raw values to better scores; declare it lower_is_better",
                criterion.scaling.kind_name()
            ));
        }
        _ => {}
    }
    match &criterion.scaling {
        ScalingMethod::MinMax { degenerate_value } | ScalingMethod::MinMaxInverted { degenerate_value } => {
            if let Some(v) = degenerate_value {
                if !(0.0..=1.0).contains(v) {
                    report.error(format!("criterion '{name}': degenerate_value {v} outside [0, 1]"));
                }
            }
        }
        ScalingMethod::BudgetCapped { budget } => {
            if !budget.is_finite() || *budget <= 0.0 {
                report.error(format!("criterion '{name}': budget must be a positive number"));
            }
        }
        ScalingMethod::GradeLinear { grade_count } => {
            if *grade_count < 2 {
                report.error(format!("criterion '{name}': grade_count must be at least 2"));
            }
            if let Some(rubric) = &criterion.rubric {
                if rubric.grade_count() != *grade_count {
                    report.error(format!(
                        "criterion '{name}': rubric declares {} grades but grade_count is {}",
                        rubric.grade_count(),
                        grade_count
                    ));
                }
            }
        }
        ScalingMethod::Constant { value } => {
            if !(0.0..=1.0).contains(value) {
                report.error(format!("criterion '{name}': constant value {value} outside [0, 1]"));
            }
        }
        ScalingMethod::LinearCapped { .. } | ScalingMethod::LogisticCapped { .. } => {
            report.error(format!(
                "criterion '{name}': {} applies to sample sizes, not criterion data",
                criterion.scaling.kind_name()
            ));
        }
    }
    if criterion.rubric_path.is_some() && !matches!(criterion.scaling, ScalingMethod::GradeLinear { .. }) {
        report.error(format!(
            "criterion '{name}': a rubric requires grade_linear scaling"
        ));
    }
}

fn validate_weights(schema: &MetricSchema, report: &mut ValidationReport) {
    let weights = &schema.weights;
    if !(weights.sum_tolerance > 0.0 && weights.sum_tolerance.is_finite()) {
        report.error("sum_tolerance must be a positive number");
    }
    if !weights.beta0.is_finite() || weights.beta0 <= 0.0 {
        report.error(format!(
            "beta0 must be strictly positive, got {}",
            weights.beta0
        ));
    }
    let additional: Vec<&CriterionSpec> = schema.additional_criteria().collect();
    for (name, w) in &weights.additional_weights {
        if !w.is_finite() || *w <= 0.0 {
            report.error(format!(
                "weight for '{name}' must be strictly positive, got {w}"
            ));
        }
        match schema.criterion(name) {
            None => report.error(format!("weight declared for unknown criterion '{name}'")),
            Some(c) if c.role.is_root() => report.error(format!(
                "criterion '{name}' is a root criterion and carries no individual weight"
            )),
            Some(_) => {}
        }
    }
    for criterion in &additional {
        if weights.weight_of(&criterion.name).is_none() {
            report.error(format!(
                "additional criterion '{}' has no weight",
                criterion.name
            ));
        }
    }
    let sum = weights.sum();
    if (sum - 1.0).abs() > weights.sum_tolerance {
        report.error(format!(
            "weights must sum to 1 (beta0 plus all additional weights), got {sum}"
        ));
    }
}

fn validate_uncertainty_var(var: &UncertaintyVariableSpec, report: &mut ValidationReport) {
    let name = &var.name;
    if var.grade_count < 2 {
        report.error(format!(
            "uncertainty variable '{name}': grade_count must be at least 2"
        ));
    }
    if !(var.minimum_threshold > 0.0 && var.minimum_threshold <= 1.0) {
        report.error(format!(
            "uncertainty variable '{name}': minimum_threshold must be in (0, 1], got {}",
            var.minimum_threshold
        ));
    }
    for g in &var.removal_grades {
        if *g >= var.grade_count {
            report.error(format!(
                "uncertainty variable '{name}': removal grade {g} outside the scale 0..{}",
                var.grade_count.saturating_sub(1)
            ));
        }
    }
    if var.grade_count >= 2 && var.retained_grades().len() < 2 {
        report.error(format!(
            "uncertainty variable '{name}': removal grades leave fewer than two retained grades"
        ));
    }
}

fn validate_options(options: &SchemaOptions, report: &mut ValidationReport) {
    if !options.sample_size_scaling.is_sample_size_kind() {
        report.error(format!(
            "sample_size_scaling must be constant, linear_capped or logistic_capped, got {}",
            options.sample_size_scaling.kind_name()
        ));
    }
    match options.sample_size_scaling {
        ScalingMethod::Constant { value } => {
            if !(value > 0.0 && value <= 1.0) {
                report.error(format!(
                    "constant sample-size weight must be in (0, 1], got {value}"
                ));
            }
        }
        ScalingMethod::LinearCapped { cap } => {
            if cap < 1 {
                report.error("linear sample-size cap must be at least 1");
            }
            if let Some((min, max)) = options.sample_size_range {
                if min >= 1 && max > min.saturating_mul(10) {
                    report.warning(format!(
                        "linear sample-size scaling chosen but the declared range {min}..{max} spans more than a multiple of ten; a capped logistic scale discriminates better there"
                    ));
                }
            }
        }
        ScalingMethod::LogisticCapped { cap } if cap < 10 => {
            report.error(format!(
                "logistic sample-size scaling requires a cap of at least 10, got {cap}"
            ));
        }
        _ => {}
    }
    let (eps_min, eps_max) = EPSILON_RANGE;
    if !(options.epsilon >= eps_min && options.epsilon <= eps_max) {
        report.error(format!(
            "epsilon must be in [{eps_min}, {eps_max}], got {}",
            options.epsilon
        ));
    }
    if !(options.confidence_level > 0.0 && options.confidence_level < 1.0) {
        report.error(format!(
            "confidence_level must be in (0, 1), got {}",
            options.confidence_level
        ));
    }
    if let Some((min, max)) = options.sample_size_range {
        if min < 1 || max < min {
            report.error(format!(
                "sample_size_range must be [min, max] with 1 <= min <= max, got [{min}, {max}]"
            ));
        }
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SchemaFile {
    criteria: Vec<CriterionSpec>,
    weights: WeightsSection,
    #[serde(default)]
    uncertainty: Vec<UncertaintyVariableSpec>,
    #[serde(default)]
    options: SchemaOptions,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightsSection {
    beta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sum_tolerance: Option<f64>,
    #[serde(flatten)]
    additional: BTreeMap<String, f64>,
}

impl SchemaFile {
    fn from_schema(schema: &MetricSchema) -> SchemaFile {
        SchemaFile {
            criteria: schema.criteria.clone(),
            weights: WeightsSection {
                beta0: schema.weights.beta0,
                sum_tolerance: if schema.weights.sum_tolerance == DEFAULT_SUM_TOLERANCE {
                    None
                } else {
                    Some(schema.weights.sum_tolerance)
                },
                additional: schema
                    .weights
                    .additional_weights
                    .iter()
                    .cloned()
                    .collect(),
            },
            uncertainty: schema.uncertainty_vars.clone(),
            options: schema.options.clone(),
        }
    }

    fn into_schema(self, report: &mut ValidationReport) -> MetricSchema {
        // Order additional weights by criteria declaration order; anything
        // left over is kept (name-sorted) so validation can reject it.
        let mut pool = self.weights.additional;
        let mut ordered = Vec::new();
        for criterion in self.criteria.iter().filter(|c| !c.role.is_root()) {
            if let Some(w) = pool.remove(&criterion.name) {
                ordered.push((criterion.name.clone(), w));
            }
        }
        for (name, w) in pool {
            report.error(format!(
                "weight declared for '{name}', which is not an additional criterion"
            ));
            ordered.push((name, w));
        }
        MetricSchema {
            criteria: self.criteria,
            weights: WeightSet {
                beta0: self.weights.beta0,
                additional_weights: ordered,
                sum_tolerance: self.weights.sum_tolerance.unwrap_or(DEFAULT_SUM_TOLERANCE),
            },
            uncertainty_vars: self.uncertainty,
            options: self.options,
        }
    }
}

/// Parse, resolve rubrics relative to `base_dir`, and validate.
pub fn load_schema_str(text: &str, label: &Path, base_dir: &Path) -> Result<MetricSchema> {
    let file: SchemaFile =
        toml::from_str(text).map_err(|e| RoamError::parse(label, e.to_string()))?;
    let mut report = ValidationReport::default();
    let mut schema = file.into_schema(&mut report);
    for criterion in &mut schema.criteria {
        if let Some(rel) = &criterion.rubric_path {
            let path = base_dir.join(rel);
            criterion.rubric = Some(load_rubric(&path)?);
        }
    }
    let mut rest = validate_schema(&schema);
    report.errors.append(&mut rest.errors);
    report.warnings.append(&mut rest.warnings);
    if !report.is_ok() {
        return Err(RoamError::Validation { report });
    }
    Ok(schema)
}

/// Load a schema file, returning it only if validation passes.
pub fn load_schema(path: &Path) -> Result<MetricSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| RoamError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_schema_str(&text, path, base)
}

/// Write the canonical TOML rendering of a schema.
pub fn save_schema(schema: &MetricSchema, path: &Path) -> Result<()> {
    std::fs::write(path, schema.to_toml_string()?).map_err(|e| RoamError::io(path, e))
}
