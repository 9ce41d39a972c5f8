//! Black-box tests of the binary: exit codes, flag handling, and the
//! example -> validate -> score -> whatif loop.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use roam_core::worked_example;

fn roam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roam"))
        .args(args)
        .output()
        .unwrap()
}

fn roam_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roam"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("fixture");
    worked_example::write_into(&fixture).unwrap();
    (dir, fixture)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_names_the_config_format() {
    let out = roam(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("roam"));
    assert!(text.contains("config format v1"), "{text}");
}

#[test]
fn validate_passes_the_fixture_schema() {
    let (_dir, fixture) = fixture();
    let out = roam(&["validate", "--schema", path_str(&fixture.join("schema.toml"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("schema ok"));
}

#[test]
fn validate_fails_on_bad_weight_sum_with_exit_1() {
    let (dir, fixture) = fixture();
    let bad = std::fs::read_to_string(fixture.join("schema.toml"))
        .unwrap()
        .replace("cost = 0.375", "cost = 0.6");
    let path = dir.path().join("bad_schema.toml");
    // rubric path resolves relative to the schema file
    std::fs::write(&path, bad).unwrap();
    std::fs::copy(
        fixture.join("rubric_effectiveness.csv"),
        dir.path().join("rubric_effectiveness.csv"),
    )
    .unwrap();
    let out = roam(&["validate", "--schema", path_str(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("must sum to 1"), "{text}");
}

#[test]
fn validate_warns_on_wide_linear_range_but_passes() {
    let (dir, fixture) = fixture();
    let wide = std::fs::read_to_string(fixture.join("schema.toml"))
        .unwrap()
        .replace("sample_size_range = [30, 200]", "sample_size_range = [30, 2000]");
    let path = dir.path().join("wide_schema.toml");
    std::fs::write(&path, wide).unwrap();
    std::fs::copy(
        fixture.join("rubric_effectiveness.csv"),
        dir.path().join("rubric_effectiveness.csv"),
    )
    .unwrap();
    let out = roam(&["validate", "--schema", path_str(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("warning"), "{text}");
    assert!(text.contains("multiple of ten"), "{text}");
}

#[test]
fn missing_mapping_file_exits_2() {
    let (dir, fixture) = fixture();
    let out = roam(&[
        "score",
        "--schema",
        path_str(&fixture.join("schema.toml")),
        "--data",
        path_str(&fixture.join("data.csv")),
        "--mapping",
        path_str(&dir.path().join("missing.toml")),
        "--out",
        path_str(&dir.path().join("report.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_error_exits_2() {
    let out = roam(&["score", "--schema"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn example_then_score_reproduces_the_expected_report() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("emitted");
    let out = roam(&["example", "--out", path_str(&fixture)]);
    assert_eq!(out.status.code(), Some(0));

    // emitting twice produces identical files
    let again = dir.path().join("again");
    roam(&["example", "--out", path_str(&again)]);
    for (name, _) in worked_example::files() {
        assert_eq!(
            std::fs::read(fixture.join(name)).unwrap(),
            std::fs::read(again.join(name)).unwrap(),
            "{name}"
        );
    }

    let report = dir.path().join("report.csv");
    let out = roam(&[
        "score",
        "--schema",
        path_str(&fixture.join("schema.toml")),
        "--data",
        path_str(&fixture.join("data.csv")),
        "--mapping",
        path_str(&fixture.join("mapping.toml")),
        "--out",
        path_str(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let produced = std::fs::read_to_string(&report).unwrap();
    let expected = std::fs::read_to_string(fixture.join("expected_report.csv")).unwrap();
    let strip = |text: &str| {
        text.lines()
            .filter(|l| !l.starts_with("# generated:"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&produced), strip(&expected));
}

#[test]
fn higher_confidence_widens_every_interval() {
    let (dir, fixture) = fixture();
    let run = |level: &str, out_name: &str| -> Vec<(f64, f64)> {
        let out_path = dir.path().join(out_name);
        let out = roam(&[
            "score",
            "--schema",
            path_str(&fixture.join("schema.toml")),
            "--data",
            path_str(&fixture.join("data.csv")),
            "--mapping",
            path_str(&fixture.join("mapping.toml")),
            "--out",
            path_str(&out_path),
            "--format",
            "records",
            "--confidence",
            level,
        ]);
        assert!(out.status.success());
        let (_, rows) = roam_core::report::read_records(&out_path).unwrap();
        rows.iter()
            .filter(|r| !r.excluded)
            .map(|r| (r.ci_lower.unwrap(), r.ci_upper.unwrap()))
            .collect()
    };
    let narrow = run("0.95", "narrow.jsonl");
    let wide = run("0.99", "wide.jsonl");
    for ((n_lo, n_hi), (w_lo, w_hi)) in narrow.iter().zip(&wide) {
        assert!(w_lo <= n_lo && w_hi >= n_hi);
        assert!((w_hi - w_lo) > (n_hi - n_lo) || (*n_lo == 0.0 && *n_hi == 1.0));
    }
}

#[test]
fn epsilon_override_moves_the_bound_adjustment() {
    let (dir, fixture) = fixture();
    let run = |eps: Option<&str>, name: &str| -> f64 {
        let out_path = dir.path().join(name);
        let mut args = vec![
            "score".to_string(),
            "--schema".into(),
            path_str(&fixture.join("schema.toml")).into(),
            "--data".into(),
            path_str(&fixture.join("data.csv")).into(),
            "--mapping".into(),
            path_str(&fixture.join("mapping.toml")).into(),
            "--out".into(),
            path_str(&out_path).into(),
            "--format".into(),
            "records".into(),
        ];
        if let Some(eps) = eps {
            args.push("--epsilon".into());
            args.push(eps.into());
        }
        let out = Command::new(env!("CARGO_BIN_EXE_roam"))
            .args(&args)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let (_, rows) = roam_core::report::read_records(&out_path).unwrap();
        // trial C has metric 0, so its sd is driven entirely by epsilon
        rows.iter()
            .find(|r| r.echo[0].value == "C")
            .unwrap()
            .sd
            .unwrap()
    };
    let default_sd = run(None, "default.jsonl");
    let bigger_sd = run(Some("0.01"), "bigger.jsonl");
    assert!(bigger_sd > default_sd);

    // out-of-range epsilon is a validation failure
    let out = roam(&[
        "score",
        "--schema",
        path_str(&fixture.join("schema.toml")),
        "--data",
        path_str(&fixture.join("data.csv")),
        "--mapping",
        path_str(&fixture.join("mapping.toml")),
        "--out",
        path_str(&dir.path().join("never.csv")),
        "--epsilon",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_schema_file_exits_2() {
    let out = roam(&["validate", "--schema", "/nonexistent/schema.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn whatif_baseline_override_changes_nothing() {
    let (dir, fixture) = fixture();
    let overrides = dir.path().join("overrides.toml");
    std::fs::write(
        &overrides,
        "[same]\nbeta0 = 0.5\ncost = 0.375\npolitics = 0.125\n\n[cost_heavy]\nbeta0 = 0.5\ncost = 0.45\npolitics = 0.05\n",
    )
    .unwrap();
    let out_path = dir.path().join("whatif.csv");
    let out = roam(&[
        "whatif",
        "--schema",
        path_str(&fixture.join("schema.toml")),
        "--data",
        path_str(&fixture.join("data.csv")),
        "--mapping",
        path_str(&fixture.join("mapping.toml")),
        "--weights-override",
        path_str(&overrides),
        "--out",
        path_str(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "row,metric_baseline,rank_baseline,metric_cost_heavy,rank_cost_heavy,metric_same,rank_same,rank_change_cost_heavy,rank_change_same"
    );
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        // rank_change_same is the last column; 0 or empty for excluded rows
        let change_same = cells[cells.len() - 1];
        assert!(change_same == "0" || change_same.is_empty(), "{line}");
    }
}

#[test]
fn whatif_rejects_beta0_zero_with_exit_1() {
    let (dir, fixture) = fixture();
    let overrides = dir.path().join("overrides.toml");
    std::fs::write(&overrides, "[broken]\nbeta0 = 0.0\ncost = 0.5\npolitics = 0.5\n").unwrap();
    let out = roam(&[
        "whatif",
        "--schema",
        path_str(&fixture.join("schema.toml")),
        "--data",
        path_str(&fixture.join("data.csv")),
        "--mapping",
        path_str(&fixture.join("mapping.toml")),
        "--weights-override",
        path_str(&overrides),
        "--out",
        path_str(&dir.path().join("whatif.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("strictly positive"), "{text}");
}

#[test]
fn config_dir_env_resolves_relative_paths() {
    let (dir, fixture) = fixture();
    let work = dir.path().join("elsewhere");
    std::fs::create_dir_all(&work).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_roam"))
        .current_dir(&work)
        .env("ROAM_CONFIG_DIR", &fixture)
        .args(["validate", "--schema", "schema.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn example_into_unwritable_destination_fails() {
    // a regular file where the directory should go blocks creation for
    // any user, including root
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, "file in the way").unwrap();
    let out = roam_in(
        dir.path(),
        &["example", "--out", path_str(&blocker.join("sub"))],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn hidden_oracle_subcommand_regenerates_values() {
    let out = roam(&["oracle", "golden"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("row,metric,sd"));
    // row 2 is the reference trial
    let line = text.lines().find(|l| l.starts_with("2,")).unwrap();
    assert!(line.contains("0.69375"), "{line}");

    let out = roam(&["oracle", "mc", "--p", "0.5", "--n", "100", "--trials", "2000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("relative_gap"));
    // oracle stays hidden from help
    let help = roam(&["--help"]);
    let help_text = String::from_utf8(help.stdout).unwrap();
    assert!(!help_text.contains("oracle"));
}
