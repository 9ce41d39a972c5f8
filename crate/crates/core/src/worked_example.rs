//! The shipped worked example: a conservation-intervention schema, rubric,
//! 12-row dataset, column mapping, and the expected report it produces.
//!
//! The same bytes back the test fixtures and the `example` CLI command, so
//! an emitted example always validates and reproduces the expected report.

use std::path::{Path, PathBuf};

use crate::error::{Result, RoamError};

pub const SCHEMA_FILE: &str = "schema.toml";
pub const RUBRIC_FILE: &str = "rubric_effectiveness.csv";
pub const DATA_FILE: &str = "data.csv";
pub const MAPPING_FILE: &str = "mapping.toml";
pub const EXPECTED_REPORT_FILE: &str = "expected_report.csv";

pub const SCHEMA_TOML: &str = include_str!("../fixtures/schema.toml");
pub const RUBRIC_CSV: &str = include_str!("../fixtures/rubric_effectiveness.csv");
pub const DATA_CSV: &str = include_str!("../fixtures/data.csv");
pub const MAPPING_TOML: &str = include_str!("../fixtures/mapping.toml");
pub const EXPECTED_REPORT_CSV: &str = include_str!("../fixtures/expected_report.csv");

pub fn files() -> [(&'static str, &'static str); 5] {
    [
        (SCHEMA_FILE, SCHEMA_TOML),
        (RUBRIC_FILE, RUBRIC_CSV),
        (DATA_FILE, DATA_CSV),
        (MAPPING_FILE, MAPPING_TOML),
        (EXPECTED_REPORT_FILE, EXPECTED_REPORT_CSV),
    ]
}

/// Write the worked-example files into a directory, creating it if needed.
pub fn write_into(dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| RoamError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, content) in files() {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| RoamError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
