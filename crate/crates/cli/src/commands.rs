//! Subcommand implementations. Each returns a typed error; the binary maps
//! errors to a diagnostic line and a nonzero exit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use hlps_core::geometry::{ols_fit, LineKind, Point2D};
use hlps_core::metrics::uniform_entropy;
use hlps_core::sim::{
    generate_scenario, run_simulation, sweep, timing_probe, SimError, SweepAxis, SweepSetting,
};

use crate::config::{parse_config, parse_privacy, ConfigError, OutputFormat, RunConfig};
use crate::report::{quantize, ReportDocument, SweepDocument};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Sim(#[from] SimError),
    #[error("cannot read config `{path}`: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write output `{path}`: {message}")]
    WriteOutput { path: PathBuf, message: String },
    #[error("invalid --vary `{0}`: {1}")]
    Vary(String, String),
    #[error("{0}")]
    Usage(String),
    #[error("invalid HLPS_SEED `{0}`: not a 64-bit unsigned integer")]
    BadSeedEnv(String),
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Default, Clone)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub trace: bool,
}

fn load_config(path: &Path, overrides: &RunOverrides) -> Result<RunConfig, CliError> {
    let document = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = parse_config(&document)?;
    if let Ok(value) = std::env::var("HLPS_SEED") {
        config.scenario.seed = value.parse().map_err(|_| CliError::BadSeedEnv(value))?;
    }
    if let Some(out) = &overrides.out {
        config.output.path = Some(out.display().to_string());
    }
    if let Some(format) = overrides.format {
        config.output.format = format;
    }
    if overrides.trace {
        config.output.trace = true;
    }
    Ok(config)
}

/// Writes via a temp file in the destination directory plus an atomic
/// rename, so a failed run never leaves a partial output file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let write = || -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    };
    write().map_err(|e| CliError::WriteOutput {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn emit(config: &RunConfig, contents: &str) -> Result<(), CliError> {
    match &config.output.path {
        Some(path) => write_atomic(Path::new(path), contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

/// `hlps run`: simulate one scenario and write the report.
pub fn cmd_run(config_path: &Path, overrides: &RunOverrides) -> Result<(), CliError> {
    let config = load_config(config_path, overrides)?;
    let scenario = generate_scenario(&config.to_params())?;
    let result = run_simulation(&scenario)?;
    let document = ReportDocument::from_simulation(&config, &result, config.output.trace);
    emit(&config, &document.encode(config.output.format))
}

fn parse_vary(spec: &str) -> Result<(String, SweepAxis), CliError> {
    let bad = |message: &str| CliError::Vary(spec.to_string(), message.to_string());
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected key=v1,v2,..."))?;
    let key = key.trim();
    let values: Vec<&str> = values.split(',').map(str::trim).collect();
    if values.iter().any(|v| v.is_empty()) {
        return Err(bad("empty value"));
    }
    let settings = values
        .iter()
        .map(|value| -> Result<SweepSetting, CliError> {
            match key {
                "n_users" => {
                    let n: usize = value.parse().map_err(|_| bad("n_users takes integers"))?;
                    if n < 1 {
                        return Err(bad("n_users must be >= 1"));
                    }
                    Ok(SweepSetting::NUsers(n))
                }
                "rho_max" => Ok(SweepSetting::RhoMax(
                    value.parse().map_err(|_| bad("rho_max takes numbers"))?,
                )),
                "serving_radius" => Ok(SweepSetting::ServingRadius(
                    value
                        .parse()
                        .map_err(|_| bad("serving_radius takes numbers"))?,
                )),
                "privacy_distribution" => Ok(SweepSetting::Privacy(
                    parse_privacy(value).map_err(|m| bad(&m))?,
                )),
                other => Err(bad(&format!(
                    "unknown key `{other}` (expected n_users, rho_max, serving_radius, or privacy_distribution)"
                ))),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((key.to_string(), SweepAxis { settings }))
}

/// `hlps sweep`: one simulation per grid point of the varied parameters.
pub fn cmd_sweep(
    config_path: &Path,
    vary: &[String],
    overrides: &RunOverrides,
) -> Result<(), CliError> {
    let config = load_config(config_path, overrides)?;
    if vary.is_empty() {
        return Err(CliError::Usage(
            "sweep needs at least one --vary".to_string(),
        ));
    }
    let mut keys = Vec::new();
    let mut axes = Vec::new();
    for spec in vary {
        let (key, axis) = parse_vary(spec)?;
        keys.push(key);
        axes.push(axis);
    }
    let rows = sweep(&config.to_params(), &axes)?;
    let document = SweepDocument::from_rows(&config, keys, &rows);
    emit(&config, &document.encode(config.output.format))
}

/// `hlps entropy-table`: anonymity-set entropies for the given sizes, CSV on
/// stdout.
pub fn cmd_entropy_table(k_values: &[usize]) -> Result<(), CliError> {
    if k_values.is_empty() {
        return Err(CliError::Usage("--k needs at least one value".to_string()));
    }
    let mut out = String::from("k,entropy_bits\n");
    for &k in k_values {
        let entropy =
            uniform_entropy(k).map_err(|_| CliError::Usage(format!("k must be >= 1, got {k}")))?;
        out.push_str(&format!("{k},{:.5}\n", entropy));
    }
    print!("{out}");
    Ok(())
}

/// `hlps timing`: probe the final-location kernel, CSV on stdout plus a
/// least-squares linearity diagnostic on stderr.
pub fn cmd_timing(sizes: &[usize], repetitions: usize) -> Result<(), CliError> {
    if sizes.is_empty() {
        return Err(CliError::Usage(
            "--sizes needs at least one value".to_string(),
        ));
    }
    if sizes.contains(&0) {
        return Err(CliError::Usage("probe sizes must be >= 1".to_string()));
    }
    if repetitions < 3 {
        return Err(CliError::Usage(format!(
            "--reps must be at least 3, got {repetitions}"
        )));
    }
    let samples = timing_probe(sizes, repetitions);
    let mut out = String::from("n,median_ms\n");
    for (n, duration) in &samples {
        out.push_str(&format!(
            "{n},{}\n",
            quantize(duration.as_secs_f64() * 1e3, 6)
        ));
    }
    print!("{out}");

    if samples.len() >= 2 {
        let points: Vec<Point2D> = samples
            .iter()
            .map(|(n, duration)| Point2D::new(*n as f64, duration.as_secs_f64() * 1e3))
            .collect();
        let fit = ols_fit(&points).expect(">= 2 points");
        if let LineKind::Sloped { slope, intercept } = fit.kind {
            eprintln!(
                "linear fit: slope_ms_per_item={slope:.3e} intercept_ms={intercept:.3e} r_squared={:.5}",
                fit.r_squared(&points)
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vary_specs_parse() {
        let (key, axis) = parse_vary("n_users=2,5,10").unwrap();
        assert_eq!(key, "n_users");
        assert_eq!(axis.settings.len(), 3);
        assert_eq!(axis.settings[2], SweepSetting::NUsers(10));

        let (_, axis) = parse_vary("privacy_distribution=uniform,fixed:0.2").unwrap();
        assert_eq!(axis.settings.len(), 2);

        assert!(parse_vary("rho_max=abc").is_err());
        assert!(parse_vary("bogus=1").is_err());
        assert!(parse_vary("n_users").is_err());
        assert!(parse_vary("n_users=0").is_err());
    }

    #[test]
    fn timing_rejects_bad_usage() {
        assert!(matches!(cmd_timing(&[], 5), Err(CliError::Usage(_))));
        assert!(matches!(cmd_timing(&[100], 2), Err(CliError::Usage(_))));
        assert!(matches!(cmd_timing(&[0], 3), Err(CliError::Usage(_))));
    }

    #[test]
    fn entropy_table_rejects_zero() {
        assert!(matches!(
            cmd_entropy_table(&[3, 0]),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(cmd_entropy_table(&[]), Err(CliError::Usage(_))));
    }
}
