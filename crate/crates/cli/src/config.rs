//! Scenario configuration.
//!
//! A TOML file with four optional sections. Every key has a default, so an
//! empty file (or no file) describes the reference scenario:
//!
//! ```toml
//! [system]
//! lambda_a = 0.5
//! lambda_b = 0.5
//! n_a = 15
//! n_b = 15
//! d_max = 3.0
//! rate_r = 1.0
//! scale_a = 1.0
//! scale_b = 1.0
//!
//! [sim]
//! horizon = 1000000
//! warmup = 10000        # default: horizon / 100
//! seeds = [1]
//! power_cap = 10000.0
//! relay_buffer = 15
//!
//! [sweep]
//! variable = "lambda"   # lambda (both rates), lambda_a, lambda_b or d_max
//! start = 0.1
//! stop = 0.9
//! step = 0.1
//!
//! [output]
//! directory = "out"
//! formats = ["csv"]     # add "svg" for plots
//! ```
//!
//! Unknown keys are rejected with their line and column.

use std::path::{Path, PathBuf};

use onc_core::sim::{DEFAULT_POWER_CAP, DEFAULT_RELAY_BUFFER};
use onc_core::{ParamError, SystemParams};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("[system] {0}")]
    System(#[from] ParamError),
    #[error("[{section}] {message}")]
    Invalid {
        section: &'static str,
        message: String,
    },
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub d_max: f64,
    pub rate_r: f64,
    pub scale_a: f64,
    pub scale_b: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        SystemSection {
            lambda_a: p.lambda_a,
            lambda_b: p.lambda_b,
            n_a: p.n_a,
            n_b: p.n_b,
            d_max: p.d_max,
            rate_r: p.rate_r,
            scale_a: p.scale_a,
            scale_b: p.scale_b,
        }
    }
}

impl SystemSection {
    pub fn params(&self) -> SystemParams {
        SystemParams {
            lambda_a: self.lambda_a,
            lambda_b: self.lambda_b,
            n_a: self.n_a,
            n_b: self.n_b,
            d_max: self.d_max,
            rate_r: self.rate_r,
            scale_a: self.scale_a,
            scale_b: self.scale_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub horizon: u64,
    /// Defaults to 1% of the horizon.
    pub warmup: Option<u64>,
    pub seeds: Vec<u64>,
    pub power_cap: f64,
    pub relay_buffer: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            horizon: 1_000_000,
            warmup: None,
            seeds: vec![1],
            power_cap: DEFAULT_POWER_CAP,
            relay_buffer: DEFAULT_RELAY_BUFFER,
        }
    }
}

impl SimSection {
    pub fn warmup(&self) -> u64 {
        self.warmup.unwrap_or(self.horizon / 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Both arrival rates together.
    Lambda,
    LambdaA,
    LambdaB,
    DMax,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Lambda => "lambda",
            SweepVariable::LambdaA => "lambda_a",
            SweepVariable::LambdaB => "lambda_b",
            SweepVariable::DMax => "d_max",
        }
    }

    pub fn apply(self, base: &SystemParams, value: f64) -> SystemParams {
        let mut p = *base;
        match self {
            SweepVariable::Lambda => {
                p.lambda_a = value;
                p.lambda_b = value;
            }
            SweepVariable::LambdaA => p.lambda_a = value,
            SweepVariable::LambdaB => p.lambda_b = value,
            SweepVariable::DMax => p.d_max = value,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            variable: SweepVariable::Lambda,
            start: 0.1,
            stop: 0.9,
            step: 0.1,
        }
    }
}

impl SweepSection {
    /// Grid values, computed as `start + k * step` to avoid accumulating
    /// rounding, and rounded to 12 decimals so 0.1 steps print cleanly.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| {
                let v = self.start + k as f64 * self.step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub system: SystemSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string().trim_end().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.system.params().validate()?;
        let sim = &self.sim;
        if sim.horizon == 0 {
            return Err(invalid("sim", "horizon must be positive"));
        }
        if sim.warmup() >= sim.horizon {
            return Err(invalid("sim", "warmup must be shorter than the horizon"));
        }
        if sim.seeds.is_empty() {
            return Err(invalid("sim", "seeds must not be empty"));
        }
        if !(sim.power_cap > 0.0) {
            return Err(invalid("sim", "power_cap must be positive"));
        }
        if sim.relay_buffer == 0 {
            return Err(invalid("sim", "relay_buffer must be at least 1"));
        }
        let sw = &self.sweep;
        if !(sw.step > 0.0) || !(sw.start <= sw.stop) || !sw.stop.is_finite() {
            return Err(invalid("sweep", "need start <= stop and step > 0"));
        }
        for v in sw.grid() {
            sw.variable
                .apply(&self.system.params(), v)
                .validate()
                .map_err(|e| invalid("sweep", format!("{} = {v}: {e}", sw.variable.name())))?;
        }
        Ok(())
    }

    pub fn params(&self) -> SystemParams {
        self.system.params()
    }

    pub fn emits(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_scenario() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c.params(), SystemParams::default());
        assert_eq!(c.sim.warmup(), 10_000);
        assert_eq!(c.sweep.grid().len(), 9);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = ScenarioConfig::parse("[system]\nlambda_a = 0.2\nlamda_b = 0.3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lamda_b"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn params_validated_at_load() {
        let err = ScenarioConfig::parse("[system]\nlambda_a = 1.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::System(_)));
        let err = ScenarioConfig::parse("[sweep]\nvariable = \"d_max\"\nstart = -1.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { section: "sweep", .. }));
    }

    #[test]
    fn grid_is_exact_on_decimal_steps() {
        let s = SweepSection {
            variable: SweepVariable::LambdaB,
            start: 0.1,
            stop: 0.9,
            step: 0.1,
        };
        let g = s.grid();
        assert_eq!(g[2], 0.3);
        assert_eq!(g[8], 0.9);
    }
}
