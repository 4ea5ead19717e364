//! Experiment configuration: one TOML file plus `key.path=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hawkes_regen::par::Execution;
use hawkes_regen::validate::ValidateConfig;
use hawkes_regen::TransferFunction;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    #[default]
    Zero,
    Exponential,
    UniformBox,
    Tabulated,
}

/// `transfer = { kind, alpha, beta, c, b, grid_file }`.
///
/// `exponential` reads `alpha, beta` (`h = alpha e^{-beta t}`), `uniform_box`
/// reads `c, b` (`h = c` on `(0, b]`) and `tabulated` reads a two-column
/// CSV `t,h` from `grid_file`, relative to the config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(default)]
    pub kind: TransferKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_file: Option<PathBuf>,
}

fn required(value: Option<f64>, key: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| CliError::Config(format!("field `transfer.{key}` is required for this kind")))
}

impl TransferConfig {
    pub fn build(&self, base_dir: &Path) -> Result<TransferFunction, CliError> {
        let bad = |e: hawkes_regen::transfer::TransferError| CliError::Config(format!("field `transfer`: {e}"));
        let h = match self.kind {
            TransferKind::Zero => TransferFunction::Zero,
            TransferKind::Exponential => {
                TransferFunction::exponential(required(self.alpha, "alpha")?, required(self.beta, "beta")?).map_err(bad)?
            }
            TransferKind::UniformBox => {
                TransferFunction::uniform_box(required(self.c, "c")?, required(self.b, "b")?).map_err(bad)?
            }
            TransferKind::Tabulated => {
                let file = self
                    .grid_file
                    .as_ref()
                    .ok_or_else(|| CliError::Config("field `transfer.grid_file` is required for kind tabulated".into()))?;
                let (grid, values) = read_two_columns(&base_dir.join(file))?;
                TransferFunction::tabulated(grid, values).map_err(bad)?
            }
        };
        h.check_subcritical().map_err(bad)?;
        Ok(h)
    }
}

/// Two numeric columns; a non-numeric first row is taken as a header.
pub fn read_two_columns(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parse = |k: usize| record.get(k).and_then(|s| s.parse::<f64>().ok());
        match (parse(0), parse(1), record.len()) {
            (Some(x), Some(y), 2) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{} line {}: expected two numeric columns",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Raw cycle lengths written by `validate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles_csv: Option<PathBuf>,
}

/// Settings of the `validate` battery that are not shared with the other subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub n_clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_grid: Option<Vec<f64>>,
    pub x_grid: Vec<f64>,
    pub identity_paths: usize,
    pub identity_horizon: f64,
    pub ergodic_horizon: f64,
    pub clt_paths: usize,
    pub clt_horizon: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        let d = ValidateConfig::default();
        Self {
            n_clusters: d.n_clusters,
            theta_grid: d.theta_grid,
            x_grid: d.x_grid,
            identity_paths: d.identity_paths,
            identity_horizon: d.identity_horizon,
            ergodic_horizon: d.ergodic_horizon,
            clt_paths: d.clt_paths,
            clt_horizon: d.clt_horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda: f64,
    #[serde(rename = "A")]
    pub window: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub init_points: Vec<f64>,
    pub seed: u64,
    /// Replications: cycles, clusters or paths depending on the subcommand.
    pub reps: usize,
    pub exec: Execution,
    pub s_grid: Vec<f64>,
    pub transfer: TransferConfig,
    pub output: OutputConfig,
    pub validate: ValidateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            window: 1.0,
            horizon: 100.0,
            init_points: Vec::new(),
            seed: 1,
            reps: 20_000,
            exec: Execution::default(),
            s_grid: vec![0.25, 0.5, 1.0, 2.0],
            transfer: TransferConfig::default(),
            output: OutputConfig::default(),
            validate: ValidateSection::default(),
        }
    }
}

/// A validated config with its kernel built.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub transfer: TransferFunction,
    /// Directory that relative paths in the file are resolved against.
    pub base_dir: PathBuf,
}

/// Parses `key.path=value`; the value is read as a TOML literal, or as a bare string.
pub fn parse_override(text: &str) -> Result<(String, toml::Value), CliError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override `{text}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut node = table;
    for part in parts {
        let entry = node.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Field-level checks; the kernel itself is checked by [`TransferConfig::build`].
    pub fn check(&self) -> Result<(), CliError> {
        let fail = |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return fail("lambda", format!("must be ≥ 0, got {}", self.lambda));
        }
        if !(self.window.is_finite() && self.window >= 0.0) {
            return fail("A", format!("must be ≥ 0, got {}", self.window));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return fail("T", format!("must be > 0, got {}", self.horizon));
        }
        if let Some(p) = self.init_points.iter().find(|p| !(p.is_finite() && **p <= 0.0)) {
            return fail("init_points", format!("all points must be ≤ 0, got {p}"));
        }
        if self.reps == 0 {
            return fail("reps", "must be ≥ 1".into());
        }
        if self.s_grid.iter().any(|s| !s.is_finite()) {
            return fail("s_grid", "values must be finite".into());
        }
        Ok(())
    }

    pub fn validate_config(&self, transfer: &TransferFunction) -> ValidateConfig {
        let v = &self.validate;
        ValidateConfig {
            lambda: self.lambda,
            transfer: transfer.clone(),
            window: self.window,
            seed: self.seed,
            exec: self.exec,
            n_cycles: self.reps,
            n_clusters: v.n_clusters,
            theta_grid: v.theta_grid.clone(),
            x_grid: v.x_grid.clone(),
            s_grid: self.s_grid.clone(),
            identity_paths: v.identity_paths,
            identity_horizon: v.identity_horizon,
            ergodic_horizon: v.ergodic_horizon,
            clt_paths: v.clt_paths,
            clt_horizon: v.clt_horizon,
        }
    }
}

/// Reads `path` (if any), applies `overrides` in order and validates the result.
pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Loaded, CliError> {
    let (text, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, dir)
        }
        None => (String::new(), PathBuf::from(".")),
    };
    // parse the file alone first so diagnostics point at its own lines
    let label = path.map(|p| p.display().to_string()).unwrap_or_default();
    toml::from_str::<ExperimentConfig>(&text).map_err(|e| CliError::Config(format!("{label}: {e}")))?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{label}: {e}")))?;
    for (key, value) in overrides {
        set_path(&mut table, key, value.clone())?;
    }
    let config: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("after overrides: {}", e.message())))?;
    config.check()?;
    let transfer = config.transfer.build(&base_dir)?;
    Ok(Loaded { config, transfer, base_dir })
}
