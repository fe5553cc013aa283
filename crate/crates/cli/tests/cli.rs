//! End-to-end tests of the `hlps` binary: exit codes, output files, env
//! overrides, and the per-subcommand output shapes.

use std::path::Path;
use std::process::{Command, Output};

use hlps::report::ReportDocument;

fn hlps(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlps"))
        .args(args)
        .current_dir(dir)
        .env_remove("HLPS_SEED")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const BASE_CONFIG: &str = "[scenario]\nn_users = 5\nseed = 42\nrounds = 3\n";

#[test]
fn run_writes_a_parseable_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let out = dir.path().join("report.json");
    let result = hlps(
        &["run", "--config", &config, "--out", out.to_str().unwrap()],
        dir.path(),
    );
    assert!(result.status.success(), "{result:?}");
    let document = ReportDocument::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(document.meta.seed, 42);
    assert_eq!(document.rounds.len(), 3);
    assert!(document.trace.is_none());
    assert_eq!(document.aggregate.sends, 33);
}

#[test]
fn trace_flag_adds_the_message_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let out = dir.path().join("trace.json");
    let result = hlps(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--trace",
        ],
        dir.path(),
    );
    assert!(result.status.success());
    let document = ReportDocument::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let trace = document.trace.expect("trace present");
    assert_eq!(trace.len(), 3);
    // 2N+1 sends per round for N = 5.
    assert!(trace.iter().all(|round| round.messages.len() == 11));
}

#[test]
fn csv_report_round_trips_through_the_cli_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let out = dir.path().join("report.csv");
    let result = hlps(
        &[
            "run",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--format",
            "csv",
            "--trace",
        ],
        dir.path(),
    );
    assert!(result.status.success());
    let csv_text = std::fs::read_to_string(&out).unwrap();
    let document = ReportDocument::from_csv(&csv_text).unwrap();
    assert_eq!(document.to_csv(), csv_text);
}

#[test]
fn seed_env_var_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let out = dir.path().join("seeded.json");
    let result = Command::new(env!("CARGO_BIN_EXE_hlps"))
        .args(["run", "--config", &config, "--out", out.to_str().unwrap()])
        .env("HLPS_SEED", "7777")
        .output()
        .unwrap();
    assert!(result.status.success());
    let document = ReportDocument::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(document.meta.seed, 7777);
    assert_eq!(document.meta.config.scenario.seed, 7777);

    let bad = Command::new(env!("CARGO_BIN_EXE_hlps"))
        .args(["run", "--config", &config])
        .env("HLPS_SEED", "not-a-number")
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn unwritable_output_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let out = "/nonexistent-hlps-dir/report.json";
    let result = hlps(&["run", "--config", &config, "--out", out], dir.path());
    assert!(!result.status.success());
    assert!(!Path::new(out).exists());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
}

#[test]
fn invalid_config_exits_nonzero_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.conf",
        "[scenario]\nn_users = 5\nseed = 1\n[noise]\nrho_min = 60\nrho_max = 50\n",
    );
    let result = hlps(&["run", "--config", &config], dir.path());
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("noise"), "stderr: {stderr}");
}

#[test]
fn entropy_table_prints_reference_rows() {
    let dir = tempfile::tempdir().unwrap();
    let result = hlps(&["entropy-table", "--k", "3,7,10"], dir.path());
    assert!(result.status.success());
    let stdout = String::from_utf8(result.stdout).unwrap();
    assert_eq!(stdout, "k,entropy_bits\n3,1.58496\n7,2.80735\n10,3.32193\n");

    let single = hlps(&["entropy-table", "--k", "1"], dir.path());
    assert_eq!(
        String::from_utf8(single.stdout).unwrap(),
        "k,entropy_bits\n1,0.00000\n"
    );
    let two = hlps(&["entropy-table", "--k", "2"], dir.path());
    assert_eq!(
        String::from_utf8(two.stdout).unwrap(),
        "k,entropy_bits\n2,1.00000\n"
    );

    let zero = hlps(&["entropy-table", "--k", "0"], dir.path());
    assert!(!zero.status.success());
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "base.conf",
        "[scenario]\nn_users = 2\nseed = 9\nrounds = 1\n",
    );
    let result = hlps(
        &[
            "sweep",
            "--config",
            &config,
            "--vary",
            "n_users=2,5,10",
            "--format",
            "csv",
        ],
        dir.path(),
    );
    assert!(result.status.success(), "{result:?}");
    let stdout = String::from_utf8(result.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("index,seed,n_users,"));
    // sends column reproduces the 2N+1 law at rounds = 1.
    let sends: Vec<&str> = lines[1..]
        .iter()
        .map(|line| line.split(',').nth(7).unwrap())
        .collect();
    assert_eq!(sends, vec!["5", "11", "21"]);
}

#[test]
fn timing_enforces_the_repetition_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let result = hlps(&["timing", "--sizes", "1000", "--reps", "2"], dir.path());
    assert!(!result.status.success());

    let ok = hlps(
        &["timing", "--sizes", "1000,2000", "--reps", "3"],
        dir.path(),
    );
    assert!(ok.status.success());
    let stdout = String::from_utf8(ok.stdout).unwrap();
    assert!(stdout.starts_with("n,median_ms\n"));
    assert_eq!(stdout.lines().count(), 3);
    let stderr = String::from_utf8(ok.stderr).unwrap();
    assert!(stderr.contains("r_squared="), "stderr: {stderr}");
}

#[test]
fn stdout_output_when_no_path_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "base.conf", BASE_CONFIG);
    let result = hlps(&["run", "--config", &config], dir.path());
    assert!(result.status.success());
    let document = ReportDocument::from_json(&String::from_utf8(result.stdout).unwrap()).unwrap();
    assert_eq!(document.rounds.len(), 3);
}
