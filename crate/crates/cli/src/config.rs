//! Run configuration: defaults, an optional JSON file, then command-line
//! overrides, each addressed by a dotted key such as `gravity.beta`.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use odflow_core::{
    CalibrationSearch, DemographicRates, GravityConfig, LoadOptions, RenderSpec, ScenarioSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Count intra-zonal trips in the cross-border share denominator.
    pub cross_border_include_intrazonal: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            cross_border_include_intrazonal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub lo: f64,
    pub hi: f64,
    pub grid_step: f64,
    pub tolerance: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let s = CalibrationSearch::default();
        CalibrationConfig {
            lo: s.lo,
            hi: s.hi,
            grid_step: s.grid_step,
            tolerance: s.tolerance,
        }
    }
}

impl CalibrationConfig {
    pub fn search(&self) -> CalibrationSearch {
        CalibrationSearch {
            lo: self.lo,
            hi: self.hi,
            grid_step: self.grid_step,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rates: DemographicRates,
    pub demand: LoadOptions,
    pub gravity: GravityConfig,
    pub scenario: ScenarioSpec,
    pub render: RenderSpec,
    pub metrics: MetricsConfig,
    pub calibrate: CalibrationConfig,
}

impl RunConfig {
    /// Defaults, overlaid with `file` (if any), overlaid with `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut tree = serde_json::to_value(RunConfig::default())?;
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            let parsed: Value = serde_json::from_str(&text)
                .with_context(|| format!("config {} is not valid JSON", path.display()))?;
            let Value::Object(entries) = parsed else {
                bail!("config {} must be a JSON object", path.display());
            };
            let mut leaves = Vec::new();
            flatten(&tree, "", entries, &mut leaves)?;
            for (key, value) in leaves {
                set_key(&mut tree, &key, value)?;
            }
        }
        for (key, value) in overrides {
            set_key(&mut tree, key, value.clone())?;
        }
        let config: RunConfig =
            serde_json::from_value(tree).map_err(|e| anyhow!("invalid configuration: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        self.gravity.validate()?;
        self.render.validate()?;
        let share = self.demand.female_share_default;
        if !(0.0..=1.0).contains(&share) {
            bail!("demand.female_share_default = {share} is not in [0, 1]");
        }
        Ok(())
    }
}

/// Collects dotted leaf keys from a config object. Nested objects are
/// descended wherever the defaults hold an object too.
fn flatten(
    defaults: &Value,
    prefix: &str,
    entries: Map<String, Value>,
    out: &mut Vec<(String, Value)>,
) -> Result<()> {
    for (key, value) in entries {
        let full = if prefix.is_empty() {
            key
        } else {
            format!("{prefix}.{key}")
        };
        match (lookup(defaults, &full), value) {
            (Some(Value::Object(_)), Value::Object(inner)) => flatten(defaults, &full, inner, out)?,
            (Some(Value::Object(_)), _) => bail!("config key `{full}` must be an object"),
            (_, value) => out.push((full, value)),
        }
    }
    Ok(())
}

fn lookup<'a>(tree: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(tree, |node, part| node.get(part))
}

fn set_key(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = tree;
    for part in key.split('.') {
        node = node
            .get_mut(part)
            .ok_or_else(|| anyhow!("unknown configuration key `{key}`"))?;
    }
    if node.is_object() {
        bail!("configuration key `{key}` names a section, not a value");
    }
    *node = value;
    Ok(())
}

/// Parses `key=value`; the value is read as JSON, falling back to a string.
pub fn parse_assignment(text: &str) -> Result<(String, Value), String> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{text}`"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.trim().to_string(), value))
}
