//! Command-line front end: validate a schema, score a dataset, run what-if
//! re-weightings, or emit the bundled worked example.
//!
//! Exit codes: 0 success, 1 validation failure (schema, mapping, weights or
//! data content), 2 usage or I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roam_core::dataset::load_mapping;
use roam_core::oracle::{brute_force_roam, empirical_se};
use roam_core::pipeline::{load_weight_overrides, score_file, what_if, write_whatif_csv};
use roam_core::report::{emit_report, RunMeta, ReportFormat};
use roam_core::schema::{load_schema, validate_schema};
use roam_core::uncertainty::aca_beta;
use roam_core::{RoamError, worked_example};

/// Environment variable naming a directory to resolve relative config paths
/// against when they are not found next to the working directory.
const CONFIG_DIR_ENV: &str = "ROAM_CONFIG_DIR";

const VERSION_STRING: &str = concat!(env!("CARGO_PKG_VERSION"), " (config format v1)");

#[derive(Parser)]
#[command(
    name = "roam",
    version = VERSION_STRING,
    about = "Goal-centred composite scoring with root/additional criteria and per-row uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Schema file (TOML)
    #[arg(long)]
    schema: PathBuf,
    /// Dataset file (CSV with a header row)
    #[arg(long)]
    data: PathBuf,
    /// Column mapping file (TOML)
    #[arg(long)]
    mapping: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a schema file and print its validation report.
    Validate {
        #[arg(long)]
        schema: PathBuf,
    },
    /// Score a dataset and write the report.
    Score {
        #[command(flatten)]
        data: DataArgs,
        /// Output report path
        #[arg(long)]
        out: PathBuf,
        /// Report format: "table" (CSV, 6 significant digits) or "records"
        /// (JSON lines, full precision)
        #[arg(long, default_value = "table")]
        format: String,
        /// Override the schema's confidence level
        #[arg(long)]
        confidence: Option<f64>,
        /// Override the schema's epsilon adjustment
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Re-score under alternative weight sets and report rank changes.
    Whatif {
        #[command(flatten)]
        data: DataArgs,
        /// TOML file of named weight-override sections
        #[arg(long = "weights-override")]
        weights_override: PathBuf,
        /// Output comparison path
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the bundled worked example (schema, rubric, dataset, mapping,
    /// expected report) into a directory.
    Example {
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate oracle values (test support).
    #[command(hide = true)]
    Oracle {
        #[command(subcommand)]
        what: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Print brute-force metric and error values for the worked example.
    Golden,
    /// Print analytic vs Monte Carlo standard errors.
    Mc {
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 100)]
        n: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 20260101)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                RoamError::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, RoamError> {
    match command {
        Command::Validate { schema } => cmd_validate(&resolve(schema)),
        Command::Score {
            data,
            out,
            format,
            confidence,
            epsilon,
        } => cmd_score(&data, &out, &format, confidence, epsilon),
        Command::Whatif {
            data,
            weights_override,
            out,
        } => cmd_whatif(&data, &resolve(weights_override), &out),
        Command::Example { out } => cmd_example(&out),
        Command::Oracle { what } => cmd_oracle(what),
    }
}

/// Fall back to $ROAM_CONFIG_DIR for relative paths that do not exist here.
fn resolve(path: PathBuf) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path;
    }
    if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
        let candidate = Path::new(&dir).join(&path);
        if candidate.exists() {
            return candidate;
        }
    }
    path
}

fn cmd_validate(schema_path: &Path) -> Result<ExitCode, RoamError> {
    match load_schema(schema_path) {
        Ok(schema) => {
            let report = validate_schema(&schema);
            print!("{report}");
            println!("schema ok: {} criteria, {} uncertainty variable(s)",
                schema.criteria.len(),
                schema.uncertainty_vars.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(RoamError::Validation { report }) => {
            print!("{report}");
            Ok(ExitCode::from(1))
        }
        Err(other) => Err(other),
    }
}

fn load_inputs(
    data: &DataArgs,
    confidence: Option<f64>,
    epsilon: Option<f64>,
) -> Result<(roam_core::MetricSchema, roam_core::dataset::ColumnMapping), RoamError> {
    let mut schema = load_schema(&resolve(data.schema.clone()))?;
    if let Some(level) = confidence {
        schema.options.confidence_level = level;
    }
    if let Some(eps) = epsilon {
        schema.options.epsilon = eps;
    }
    let report = validate_schema(&schema);
    if !report.is_ok() {
        return Err(RoamError::Validation { report });
    }
    let mapping = load_mapping(&resolve(data.mapping.clone()))?;
    Ok((schema, mapping))
}

fn cmd_score(
    data: &DataArgs,
    out: &Path,
    format: &str,
    confidence: Option<f64>,
    epsilon: Option<f64>,
) -> Result<ExitCode, RoamError> {
    let format: ReportFormat = format.parse()?;
    let (schema, mapping) = load_inputs(data, confidence, epsilon)?;
    let meta = RunMeta::new(schema.hash()?, now());
    let run = score_file(&schema, &mapping, &resolve(data.data.clone()), meta)?;
    for warning in &run.warnings {
        eprintln!("warning: {warning}");
    }
    // outlier inspection: removal is the analyst's call, so only report
    for (name, s) in &run.stats.criteria {
        eprintln!(
            "info: criterion '{name}' over {} retained row(s): min {}, q1 {}, median {}, q3 {}, max {} (IQR {})",
            s.count, s.min, s.q1, s.median, s.q3, s.max, s.iqr()
        );
    }
    for diagnostic in &run.diagnostics {
        eprintln!("note: {diagnostic}");
    }
    emit_report(&run.report, out, format)?;
    let scored = run.report.rows.iter().filter(|r| !r.excluded).count();
    let excluded = run.report.rows.len() - scored;
    eprintln!("scored {scored} row(s), excluded {excluded}; report written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_whatif(data: &DataArgs, overrides_path: &Path, out: &Path) -> Result<ExitCode, RoamError> {
    let (schema, mapping) = load_inputs(data, None, None)?;
    let overrides = load_weight_overrides(overrides_path, &schema)?;
    let report = what_if(&schema, &mapping, &resolve(data.data.clone()), &overrides)?;
    let file = std::fs::File::create(out).map_err(|e| RoamError::io(out, e))?;
    write_whatif_csv(&report, std::io::BufWriter::new(file))?;
    eprintln!(
        "compared {} weight set(s) over {} row(s); report written to {}",
        report.set_names.len(),
        report.rows.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_example(dir: &Path) -> Result<ExitCode, RoamError> {
    let written = worked_example::write_into(dir)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(what: OracleCommand) -> Result<ExitCode, RoamError> {
    match what {
        OracleCommand::Golden => {
            let dir = tempfile_dir()?;
            worked_example::write_into(&dir)?;
            let schema = load_schema(&dir.join(worked_example::SCHEMA_FILE))?;
            let mapping = load_mapping(&dir.join(worked_example::MAPPING_FILE))?;
            let meta = RunMeta::new(schema.hash()?, "oracle".into());
            let run = score_file(&schema, &mapping, &dir.join(worked_example::DATA_FILE), meta)?;
            let beta0 = schema.weights.beta0;
            let weights: Vec<f64> = schema
                .weights
                .additional_weights
                .iter()
                .map(|(_, w)| *w)
                .collect();
            println!("row,metric,sd");
            for row in run.report.rows.iter().filter(|r| !r.excluded) {
                let additional: Vec<f64> = schema
                    .additional_criteria()
                    .map(|c| row.scaled.iter().find(|s| s.criterion == c.name).unwrap().value)
                    .collect();
                let roots: Vec<f64> = schema
                    .root_criteria()
                    .map(|c| row.scaled.iter().find(|s| s.criterion == c.name).unwrap().value)
                    .collect();
                let metric = brute_force_roam(beta0, &weights, &additional, &roots);
                let n: u64 = row
                    .echo
                    .iter()
                    .find(|c| c.column == "sample_size")
                    .unwrap()
                    .value
                    .parse()
                    .expect("fixture sample size");
                let usability: u32 = row
                    .echo
                    .iter()
                    .find(|c| c.column == "usability")
                    .unwrap()
                    .value
                    .parse()
                    .expect("fixture usability");
                let weight = [1.0, 0.8, 0.6][usability as usize];
                let beta = aca_beta(metric, n, &[("usability".into(), weight)], schema.options.epsilon)?;
                println!("{},{:?},{:?}", row.row, metric, beta.sd);
            }
            std::fs::remove_dir_all(&dir).ok();
            Ok(ExitCode::SUCCESS)
        }
        OracleCommand::Mc { p, n, trials, seed } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(RoamError::config("p must be in (0, 1)"));
            }
            if trials < 1000 {
                return Err(RoamError::config("need at least 1000 trials"));
            }
            let analytic = aca_beta(p, n, &[], 1e-3)?.sd;
            let empirical = empirical_se(p, n, trials, seed);
            println!("p,n,trials,seed,analytic_sd,empirical_se,relative_gap");
            println!(
                "{p},{n},{trials},{seed},{analytic:?},{empirical:?},{:?}",
                (analytic - empirical).abs() / empirical
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn tempfile_dir() -> Result<PathBuf, RoamError> {
    let dir = std::env::temp_dir().join(format!("roam-oracle-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| RoamError::io(&dir, e))?;
    Ok(dir)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
