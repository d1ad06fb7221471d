//! Experiment configuration.
//!
//! The file format is TOML restricted to four flat sections, `[model]`,
//! `[filter]`, `[adaptation]` and `[experiment]`. Overrides use dotted keys
//! (`adaptation.p_high=0.7`) and take precedence over the file. Omitted keys
//! take their defaults; unknown keys are rejected.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::adaptation::AdaptiveConfig;
use crate::error::{Result, SmcError};
use crate::models::{LinearGaussianConfig, LorenzConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Lorenz,
    LinearGaussian,
}

/// `[model]`: the model kind plus the parameters of that kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Lorenz(LorenzConfig),
    LinearGaussian(LinearGaussianConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Lorenz(LorenzConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    #[default]
    Adaptive,
    /// Constant particle count `filter.particles`; the assessment still runs.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub mode: FilterMode,
    pub particles: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            mode: FilterMode::Adaptive,
            particles: 1 << 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Number of observations per run.
    pub t: usize,
    pub runs: usize,
    pub seed: u64,
    /// Leading fraction of steps dropped from the MSE and mean p-value.
    pub discard_fraction: f64,
    /// Write one CSV per run in addition to the aggregate.
    pub per_run_csv: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            t: 2000,
            runs: 1,
            seed: 0,
            discard_fraction: 0.0,
            per_run_csv: true,
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub filter: FilterSpec,
    pub adaptation: AdaptiveConfig,
    pub experiment: ExperimentSpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    model: Table,
    #[serde(default)]
    filter: FilterSpec,
    #[serde(default)]
    adaptation: AdaptiveConfig,
    #[serde(default)]
    experiment: ExperimentSpec,
}

const SECTIONS: [&str; 4] = ["model", "filter", "adaptation", "experiment"];

fn config_error(key: impl Into<String>, message: impl Into<String>) -> SmcError {
    SmcError::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Interpret an override value: TOML scalar/array syntax if it parses,
/// otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    let probe = format!("v = {raw}");
    match probe.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Split `section.key=value`.
pub fn parse_override(text: &str) -> Result<(String, String, Value)> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| config_error(text, "override must have the form section.key=value"))?;
    let path = path.trim();
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| config_error(path, "override key must be section.key"))?;
    if !SECTIONS.contains(&section) {
        return Err(config_error(path, format!("unknown section `{section}`")));
    }
    if key.is_empty() || key.contains('.') {
        return Err(config_error(path, "override key must be section.key"));
    }
    Ok((section.to_string(), key.to_string(), parse_value(raw.trim())))
}

fn split_toml_error(e: &toml::de::Error) -> (String, String) {
    let message = e.message().to_string();
    // serde reports unknown fields as "unknown field `x`, expected ..."
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".to_string());
    (key, message)
}

/// Parse a configuration document and apply `overrides` on top of it.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
        let (key, message) = split_toml_error(&e);
        config_error(key, message)
    })?;

    for (section, value) in &table {
        if !SECTIONS.contains(&section.as_str()) {
            return Err(config_error(section.clone(), "unknown section"));
        }
        if !value.is_table() {
            return Err(config_error(section.clone(), "expected a table"));
        }
    }

    for o in overrides {
        let (section, key, value) = parse_override(o)?;
        let entry = table
            .entry(section.clone())
            .or_insert_with(|| Value::Table(Table::new()));
        entry
            .as_table_mut()
            .expect("sections validated as tables")
            .insert(key, value);
    }

    let section_error = |section: &str, e: toml::de::Error| {
        let (key, message) = split_toml_error(&e);
        config_error(format!("{section}.{key}"), message)
    };

    let take = |table: &Table, name: &str| -> Value {
        table
            .get(name)
            .cloned()
            .unwrap_or_else(|| Value::Table(Table::new()))
    };

    let filter: FilterSpec = take(&table, "filter")
        .try_into()
        .map_err(|e| section_error("filter", e))?;
    let adaptation: AdaptiveConfig = take(&table, "adaptation")
        .try_into()
        .map_err(|e| section_error("adaptation", e))?;
    let experiment: ExperimentSpec = take(&table, "experiment")
        .try_into()
        .map_err(|e| section_error("experiment", e))?;

    let mut model_table = take(&table, "model")
        .as_table()
        .cloned()
        .unwrap_or_default();
    let kind: ModelKind = match model_table.remove("kind") {
        None => ModelKind::default(),
        Some(v) => v
            .try_into()
            .map_err(|_| config_error("model.kind", "expected \"lorenz\" or \"linear_gaussian\""))?,
    };
    let model = match kind {
        ModelKind::Lorenz => ModelSpec::Lorenz(
            Value::Table(model_table)
                .try_into()
                .map_err(|e| section_error("model", e))?,
        ),
        ModelKind::LinearGaussian => ModelSpec::LinearGaussian(
            Value::Table(model_table)
                .try_into()
                .map_err(|e| section_error("model", e))?,
        ),
    };

    let config = ExperimentConfig {
        model,
        filter,
        adaptation,
        experiment,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.model {
            ModelSpec::Lorenz(c) => c.validate()?,
            ModelSpec::LinearGaussian(c) => c.validate()?,
        }
        self.adaptation.validate()?;
        if self.filter.mode == FilterMode::Fixed && self.filter.particles == 0 {
            return Err(config_error("filter.particles", "must be a positive integer"));
        }
        if self.experiment.t == 0 {
            return Err(config_error("experiment.t", "must be a positive integer"));
        }
        if self.experiment.runs == 0 {
            return Err(config_error("experiment.runs", "must be a positive integer"));
        }
        let d = self.experiment.discard_fraction;
        if !(0.0..1.0).contains(&d) {
            return Err(config_error("experiment.discard_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// The adaptation parameters the filter actually runs with.
    pub fn effective_adaptation(&self) -> AdaptiveConfig {
        match self.filter.mode {
            FilterMode::Adaptive => self.adaptation.clone(),
            FilterMode::Fixed => AdaptiveConfig {
                m0: self.filter.particles,
                m_min: self.filter.particles,
                m_max: self.filter.particles,
                ..self.adaptation.clone()
            },
        }
    }

    /// Resolved configuration as a TOML document that [`parse_config`]
    /// reads back to an identical value.
    pub fn to_toml(&self) -> String {
        let mut model = match &self.model {
            ModelSpec::Lorenz(c) => Value::try_from(c),
            ModelSpec::LinearGaussian(c) => Value::try_from(c),
        }
        .expect("model config serialises")
        .as_table()
        .cloned()
        .unwrap_or_default();
        let kind = match self.model {
            ModelSpec::Lorenz(_) => "lorenz",
            ModelSpec::LinearGaussian(_) => "linear_gaussian",
        };
        model.insert("kind".into(), Value::String(kind.into()));
        let doc = Document {
            model,
            filter: self.filter.clone(),
            adaptation: self.adaptation.clone(),
            experiment: self.experiment.clone(),
        };
        toml::to_string(&doc).expect("config serialises")
    }
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub config: ExperimentConfig,
}

/// Threshold pairs of the reproduction ladder, most demanding first.
pub const TABLE3_LADDER: [(f64, f64); 5] =
    [(0.4, 0.8), (0.35, 0.7), (0.3, 0.7), (0.25, 0.65), (0.2, 0.6)];

pub const PRESETS: [&str; 4] = ["table3-desk", "table3-full", "m0-desk", "m0-full"];

fn threshold_label(p_low: f64, p_high: f64) -> String {
    format!("adaptive_{p_low}-{p_high}")
}

/// Expand a named preset into its sweep entries, starting from `base`.
/// Model and seed come from `base`; the preset fixes the protocol.
pub fn preset(name: &str, base: &ExperimentConfig) -> Result<Vec<SweepEntry>> {
    let table3 = |t: usize, runs: usize| {
        let mut common = base.clone();
        common.experiment.t = t;
        common.experiment.runs = runs;
        common.experiment.discard_fraction = 0.5;
        common.adaptation.m0 = 1 << 15;
        common.adaptation.m_max = 1 << 15;
        common.adaptation.m_min = 1 << 7;
        common.adaptation.k = 7;
        common.adaptation.w = 20;
        let mut entries = Vec::new();
        let mut fixed = common.clone();
        fixed.filter = FilterSpec {
            mode: FilterMode::Fixed,
            particles: 1 << 15,
        };
        entries.push(SweepEntry {
            label: "fixed_32768".into(),
            config: fixed,
        });
        for (p_low, p_high) in TABLE3_LADDER {
            let mut c = common.clone();
            c.filter.mode = FilterMode::Adaptive;
            c.adaptation.p_low = p_low;
            c.adaptation.p_high = p_high;
            entries.push(SweepEntry {
                label: threshold_label(p_low, p_high),
                config: c,
            });
        }
        entries
    };
    let m0_study = |t: usize, runs: usize| {
        [10usize, 5000]
            .into_iter()
            .map(|m0| {
                let mut c = base.clone();
                c.filter.mode = FilterMode::Adaptive;
                c.experiment.t = t;
                c.experiment.runs = runs;
                c.adaptation.m0 = m0;
                c.adaptation.m_min = 10;
                c.adaptation.m_max = 5000;
                c.adaptation.p_low = 0.3;
                c.adaptation.p_high = 0.7;
                SweepEntry {
                    label: format!("m0_{m0}"),
                    config: c,
                }
            })
            .collect()
    };
    let entries = match name {
        "table3-desk" => table3(500, 20),
        "table3-full" => table3(2000, 100),
        "m0-desk" => m0_study(500, 20),
        "m0-full" => m0_study(2000, 100),
        other => {
            return Err(SmcError::InvalidArgument(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    };
    for e in &entries {
        e.config.validate()?;
    }
    Ok(entries)
}
