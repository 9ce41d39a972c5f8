//! Goal-centred composite scoring with a root/additional utility function.
//!
//! The pipeline homogenizes heterogeneous criterion data onto [0, 1],
//! evaluates a weighted utility function into a metric per data-point, and
//! attaches uncertainty weights, standard errors and clamped confidence
//! intervals derived from a beta distribution constructed per row.
//!
//! Modules follow the pipeline order:
//!
//! - [`schema`]: declarative metric schema with validation
//! - [`rubric`] and [`scaling`]: homogenization onto [0, 1]
//! - [`metric`]: the utility function itself
//! - [`uncertainty`]: weights, constructed betas, confidence intervals
//! - [`dataset`] and [`report`]: tabular ingestion and deterministic emission
//! - [`pipeline`]: orchestration plus what-if re-weighting
//! - [`oracle`]: independent brute-force and Monte Carlo validators

pub mod dataset;
pub mod error;
pub mod metric;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod rubric;
pub mod scaling;
pub mod schema;
pub mod uncertainty;
pub mod worked_example;

pub use error::{Result, RoamError};
pub use schema::{load_schema, validate_schema, MetricSchema, ValidationReport, WeightSet};
