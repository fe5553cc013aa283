//! Run configuration parsing and validation.
//!
//! The native format is a flat, sectioned key-value text document:
//!
//! ```text
//! # lines starting with # are comments
//! [scenario]
//! n_users = 10
//! seed = 42
//!
//! [noise]
//! rho_max = 50
//! ```
//!
//! A JSON document with the same section/key structure is accepted as an
//! alternative encoding (detected by a leading `{`). Only `n_users` and
//! `seed` are required; every other key has a documented default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use hlps_core::metrics::EnergyConfig;
use hlps_core::protocol::{NoiseConfig, ServiceTag};
use hlps_core::sim::{
    PrivacyDistribution, Region, ScenarioParams, DEFAULT_INTEREST_RADIUS, DEFAULT_SERVING_RADIUS,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Report/output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

/// A fully validated run configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub noise: NoiseSection,
    pub provider: ProviderSection,
    pub energy: EnergySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub n_users: usize,
    pub seed: u64,
    pub rounds: usize,
    pub region_width: f64,
    pub region_height: f64,
    pub n_pois: usize,
    pub service: String,
    /// `uniform`, `fixed:<p>`, or `list:<p1;p2;...>`.
    pub privacy: String,
    pub interest_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    pub rho_min: f64,
    pub rho_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSection {
    pub serving_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySection {
    /// Millijoules per transmitted message.
    pub e_tx_mj: f64,
    /// Millijoules per received message.
    pub e_rx_mj: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub path: Option<String>,
    pub trace: bool,
}

/// Parses `uniform`, `fixed:<p>`, or `list:<p1;p2;...>`.
pub fn parse_privacy(text: &str) -> Result<PrivacyDistribution, String> {
    if text == "uniform" {
        return Ok(PrivacyDistribution::Uniform);
    }
    if let Some(value) = text.strip_prefix("fixed:") {
        let p: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("`{value}` is not a number"))?;
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(format!("fixed level {p} outside [0, 1]"));
        }
        return Ok(PrivacyDistribution::Fixed(p));
    }
    if let Some(list) = text.strip_prefix("list:") {
        let mut values = Vec::new();
        for item in list.split(';') {
            let p: f64 = item
                .trim()
                .parse()
                .map_err(|_| format!("`{item}` is not a number"))?;
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(format!("list entry {p} outside [0, 1]"));
            }
            values.push(p);
        }
        if values.is_empty() {
            return Err("empty privacy list".to_string());
        }
        return Ok(PrivacyDistribution::Explicit(values));
    }
    Err(format!(
        "`{text}` is not one of uniform | fixed:<p> | list:<p1;p2;...>"
    ))
}

/// Inverse of [`parse_privacy`].
pub fn format_privacy(distribution: &PrivacyDistribution) -> String {
    match distribution {
        PrivacyDistribution::Uniform => "uniform".to_string(),
        PrivacyDistribution::Fixed(p) => format!("fixed:{p}"),
        PrivacyDistribution::Explicit(values) => {
            let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            format!("list:{}", parts.join(";"))
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    scenario: RawScenario,
    noise: RawNoise,
    provider: RawProvider,
    energy: RawEnergy,
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawScenario {
    n_users: Option<usize>,
    seed: Option<u64>,
    rounds: Option<usize>,
    region_width: Option<f64>,
    region_height: Option<f64>,
    n_pois: Option<usize>,
    service: Option<String>,
    privacy: Option<String>,
    interest_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawNoise {
    rho_min: Option<f64>,
    rho_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawProvider {
    serving_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawEnergy {
    e_tx_mj: Option<f64>,
    e_rx_mj: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    format: Option<OutputFormat>,
    path: Option<String>,
    trace: Option<bool>,
}

fn set<T>(slot: &mut Option<T>, value: T, field: &str) -> Result<(), ConfigError> {
    if slot.is_some() {
        return Err(invalid(field, "duplicate key"));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_value<T: std::str::FromStr>(value: &str, field: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| invalid(field, format!("cannot parse `{value}`")))
}

impl RawConfig {
    fn assign(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let field = format!("{section}.{key}");
        match (section, key) {
            ("scenario", "n_users") => set(
                &mut self.scenario.n_users,
                parse_value(value, &field)?,
                &field,
            ),
            ("scenario", "seed") => {
                set(&mut self.scenario.seed, parse_value(value, &field)?, &field)
            }
            ("scenario", "rounds") => set(
                &mut self.scenario.rounds,
                parse_value(value, &field)?,
                &field,
            ),
            ("scenario", "region_width") => set(
                &mut self.scenario.region_width,
                parse_value(value, &field)?,
                &field,
            ),
            ("scenario", "region_height") => set(
                &mut self.scenario.region_height,
                parse_value(value, &field)?,
                &field,
            ),
            ("scenario", "n_pois") => set(
                &mut self.scenario.n_pois,
                parse_value(value, &field)?,
                &field,
            ),
            ("scenario", "service") => {
                set(&mut self.scenario.service, value.trim().to_string(), &field)
            }
            ("scenario", "privacy") => {
                set(&mut self.scenario.privacy, value.trim().to_string(), &field)
            }
            ("scenario", "interest_radius") => set(
                &mut self.scenario.interest_radius,
                parse_value(value, &field)?,
                &field,
            ),
            ("noise", "rho_min") => {
                set(&mut self.noise.rho_min, parse_value(value, &field)?, &field)
            }
            ("noise", "rho_max") => {
                set(&mut self.noise.rho_max, parse_value(value, &field)?, &field)
            }
            ("provider", "serving_radius") => set(
                &mut self.provider.serving_radius,
                parse_value(value, &field)?,
                &field,
            ),
            ("energy", "e_tx_mj") => set(
                &mut self.energy.e_tx_mj,
                parse_value(value, &field)?,
                &field,
            ),
            ("energy", "e_rx_mj") => set(
                &mut self.energy.e_rx_mj,
                parse_value(value, &field)?,
                &field,
            ),
            ("output", "format") => {
                let format = match value.trim() {
                    "json" => OutputFormat::Json,
                    "csv" => OutputFormat::Csv,
                    other => return Err(invalid(&field, format!("`{other}` is not csv or json"))),
                };
                set(&mut self.output.format, format, &field)
            }
            ("output", "path") => set(&mut self.output.path, value.trim().to_string(), &field),
            ("output", "trace") => set(&mut self.output.trace, parse_value(value, &field)?, &field),
            _ => Err(invalid(field, "unknown key")),
        }
    }

    fn finish(self) -> Result<RunConfig, ConfigError> {
        let n_users = self
            .scenario
            .n_users
            .ok_or_else(|| invalid("scenario.n_users", "required"))?;
        if n_users < 1 {
            return Err(invalid("scenario.n_users", "must be at least 1"));
        }
        let seed = self
            .scenario
            .seed
            .ok_or_else(|| invalid("scenario.seed", "required"))?;

        let region_width = self.scenario.region_width.unwrap_or(1000.0);
        let region_height = self.scenario.region_height.unwrap_or(1000.0);
        if !(region_width.is_finite() && region_width > 0.0) {
            return Err(invalid("scenario.region_width", "must be positive"));
        }
        if !(region_height.is_finite() && region_height > 0.0) {
            return Err(invalid("scenario.region_height", "must be positive"));
        }

        let service = self
            .scenario
            .service
            .unwrap_or_else(|| "restaurant".to_string());
        if service.is_empty() {
            return Err(invalid("scenario.service", "must be nonempty"));
        }

        let privacy = self
            .scenario
            .privacy
            .unwrap_or_else(|| "uniform".to_string());
        let distribution =
            parse_privacy(&privacy).map_err(|message| invalid("scenario.privacy", message))?;
        if let PrivacyDistribution::Explicit(values) = &distribution {
            if values.len() != n_users {
                return Err(invalid(
                    "scenario.privacy",
                    format!("list has {} entries for {} users", values.len(), n_users),
                ));
            }
        }

        let interest_radius = self
            .scenario
            .interest_radius
            .unwrap_or(DEFAULT_INTEREST_RADIUS);
        if !(interest_radius.is_finite() && interest_radius > 0.0) {
            return Err(invalid("scenario.interest_radius", "must be positive"));
        }

        let rho_min = self.noise.rho_min.unwrap_or(5.0);
        let rho_max = self.noise.rho_max.unwrap_or(50.0);
        if !(rho_min.is_finite() && rho_max.is_finite() && 0.0 <= rho_min && rho_min <= rho_max) {
            return Err(invalid("noise", "requires 0 <= rho_min <= rho_max"));
        }

        let serving_radius = self
            .provider
            .serving_radius
            .unwrap_or(DEFAULT_SERVING_RADIUS);
        if !(serving_radius.is_finite() && serving_radius > 0.0) {
            return Err(invalid("provider.serving_radius", "must be positive"));
        }

        let e_tx_mj = self.energy.e_tx_mj.unwrap_or(0.66);
        let e_rx_mj = self.energy.e_rx_mj.unwrap_or(0.395);
        if !(e_tx_mj.is_finite() && e_tx_mj >= 0.0) {
            return Err(invalid("energy.e_tx_mj", "must be >= 0"));
        }
        if !(e_rx_mj.is_finite() && e_rx_mj >= 0.0) {
            return Err(invalid("energy.e_rx_mj", "must be >= 0"));
        }

        Ok(RunConfig {
            scenario: ScenarioSection {
                n_users,
                seed,
                rounds: self.scenario.rounds.unwrap_or(10),
                region_width,
                region_height,
                n_pois: self.scenario.n_pois.unwrap_or(100),
                service,
                privacy,
                interest_radius,
            },
            noise: NoiseSection { rho_min, rho_max },
            provider: ProviderSection { serving_radius },
            energy: EnergySection { e_tx_mj, e_rx_mj },
            output: OutputSection {
                format: self.output.format.unwrap_or(OutputFormat::Json),
                path: self.output.path,
                trace: self.output.trace.unwrap_or(false),
            },
        })
    }
}

/// Parses and validates a configuration document (sectioned key-value text,
/// or JSON when the document starts with `{`).
pub fn parse_config(document: &str) -> Result<RunConfig, ConfigError> {
    let trimmed = document.trim_start();
    if trimmed.starts_with('{') {
        return parse_json_config(document);
    }
    let mut raw = RawConfig::default();
    let mut section: Option<String> = None;
    for (index, line) in document.lines().enumerate() {
        let line_no = index + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                message: "unterminated section header".to_string(),
            })?;
            let name = name.trim();
            if !matches!(
                name,
                "scenario" | "noise" | "provider" | "energy" | "output"
            ) {
                return Err(invalid(name, "unknown section"));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: "expected `key = value`".to_string(),
        })?;
        let section = section.as_deref().ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            message: "key outside any [section]".to_string(),
        })?;
        raw.assign(section, key.trim(), value)?;
    }
    raw.finish()
}

fn parse_json_config(document: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(document).map_err(|e| {
        if e.is_data() {
            invalid("document", e.to_string())
        } else {
            ConfigError::Syntax {
                line: e.line(),
                message: e.to_string(),
            }
        }
    })?;
    raw.finish()
}

impl RunConfig {
    /// Renders the config back as the sectioned text format; parsing the
    /// result reproduces this config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (section, pairs) in self.sections() {
            out.push('[');
            out.push_str(section);
            out.push_str("]\n");
            for (key, value) in pairs {
                out.push_str(&format!("{key} = {value}\n"));
            }
            out.push('\n');
        }
        out.pop();
        out
    }

    /// Dotted `(section.key, value)` pairs in document order, used by the
    /// CSV report encoding.
    pub fn flat_pairs(&self) -> Vec<(String, String)> {
        self.sections()
            .into_iter()
            .flat_map(|(section, pairs)| {
                pairs
                    .into_iter()
                    .map(move |(key, value)| (format!("{section}.{key}"), value))
            })
            .collect()
    }

    /// Rebuilds a config from [`RunConfig::flat_pairs`] output.
    pub fn from_flat_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (dotted, value) in pairs {
            let (section, key) = dotted
                .split_once('.')
                .ok_or_else(|| invalid(dotted.clone(), "expected section.key"))?;
            raw.assign(section, key, value)?;
        }
        raw.finish()
    }

    fn sections(&self) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
        let mut output_pairs = vec![("format", self.output.format.as_str().to_string())];
        if let Some(path) = &self.output.path {
            output_pairs.push(("path", path.clone()));
        }
        output_pairs.push(("trace", self.output.trace.to_string()));
        vec![
            (
                "scenario",
                vec![
                    ("n_users", self.scenario.n_users.to_string()),
                    ("seed", self.scenario.seed.to_string()),
                    ("rounds", self.scenario.rounds.to_string()),
                    ("region_width", self.scenario.region_width.to_string()),
                    ("region_height", self.scenario.region_height.to_string()),
                    ("n_pois", self.scenario.n_pois.to_string()),
                    ("service", self.scenario.service.clone()),
                    ("privacy", self.scenario.privacy.clone()),
                    ("interest_radius", self.scenario.interest_radius.to_string()),
                ],
            ),
            (
                "noise",
                vec![
                    ("rho_min", self.noise.rho_min.to_string()),
                    ("rho_max", self.noise.rho_max.to_string()),
                ],
            ),
            (
                "provider",
                vec![("serving_radius", self.provider.serving_radius.to_string())],
            ),
            (
                "energy",
                vec![
                    ("e_tx_mj", self.energy.e_tx_mj.to_string()),
                    ("e_rx_mj", self.energy.e_rx_mj.to_string()),
                ],
            ),
            ("output", output_pairs),
        ]
    }

    /// The generator parameters this config describes.
    pub fn to_params(&self) -> ScenarioParams {
        ScenarioParams {
            region: Region::new(self.scenario.region_width, self.scenario.region_height),
            n_users: self.scenario.n_users,
            n_pois: self.scenario.n_pois,
            privacy: parse_privacy(&self.scenario.privacy).expect("validated at parse time"),
            seed: self.scenario.seed,
            rounds: self.scenario.rounds,
            noise: NoiseConfig {
                rho_min: self.noise.rho_min,
                rho_max: self.noise.rho_max,
            },
            service: ServiceTag(self.scenario.service.clone()),
            interest_radius: self.scenario.interest_radius,
            serving_radius: self.provider.serving_radius,
            energy: EnergyConfig {
                e_tx: self.energy.e_tx_mj * 1e-3,
                e_rx: self.energy.e_rx_mj * 1e-3,
            },
        }
    }
}
