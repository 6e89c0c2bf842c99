//! Configuration-driven parameter sweeps.
//!
//! A run file is TOML with a `[model]` table (any [`ModelConfig`] field), an
//! optional `[spectrum]` table, an optional list of `[[variant]]` overrides
//! and a list of `[[sweep]]` axes. Every variant is run along every sweep;
//! with no sweeps each variant is evaluated once with the top-level
//! `outputs`.

mod compare;
mod recipes;
mod run;
mod table;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{short_digest, ModelConfig, ModelKind};
use crate::error::{Error, Result};

pub use compare::{compare_goldens, CompareReport, FileReport, FileStatus, Tolerances};
pub use recipes::{recipe, recipes, Recipe};
pub use run::{evaluate_point, run, run_config, JobRecord, JobStatus, RunManifest, RunOptions};
pub use table::{read_csv, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `g_a = g_b = η ω_c` (atom b only when present).
    EtaJoint,
    /// `g_a = η ω_c`.
    EtaSingle,
    OmegaB,
    /// `|g_b|` in units of `ω_c`.
    GBMagnitude,
    PhiB,
    OmegaS,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::EtaJoint => "eta_joint",
            Target::EtaSingle => "eta_single",
            Target::OmegaB => "omega_b",
            Target::GBMagnitude => "g_b_magnitude",
            Target::PhiB => "phi_b",
            Target::OmegaS => "omega_s",
        }
    }

    /// Copy of `cfg` with the swept parameter set to `value`.
    pub fn apply(self, cfg: &ModelConfig, value: f64) -> ModelConfig {
        let mut out = cfg.clone();
        let wc = cfg.omega_c;
        match self {
            Target::EtaJoint => {
                out.g_a = value * wc;
                if matches!(cfg.model, ModelKind::Gdm | ModelKind::GdmRwa) {
                    out.g_b = value * wc;
                }
            }
            Target::EtaSingle => out.g_a = value * wc,
            Target::OmegaB => out.omega_b = value * wc,
            Target::GBMagnitude => out.g_b = value * wc,
            Target::PhiB => out.phi_b = value,
            Target::OmegaS => out.omega_s = value * wc,
        }
        out
    }

    fn check_model(self, model: ModelKind) -> std::result::Result<(), String> {
        let gdm = matches!(model, ModelKind::Gdm | ModelKind::GdmRwa);
        let saa = matches!(model, ModelKind::Saa | ModelKind::SaaRwa);
        match self {
            Target::OmegaB | Target::GBMagnitude | Target::PhiB if !gdm => {
                Err(format!("`{}` needs a two-atom model, got `{model}`", self.name()))
            }
            Target::OmegaS if !saa => Err(format!("`omega_s` needs a sensing-atom model, got `{model}`")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Eigenvalues,
    Parity,
    P2Table,
    SpectrumQrt,
    SpectrumSaa,
}

impl Output {
    pub const ALL: [Output; 5] = [
        Output::Eigenvalues,
        Output::Parity,
        Output::P2Table,
        Output::SpectrumQrt,
        Output::SpectrumSaa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::Eigenvalues => "eigenvalues",
            Output::Parity => "parity",
            Output::P2Table => "p2_table",
            Output::SpectrumQrt => "spectrum_qrt",
            Output::SpectrumSaa => "spectrum_saa",
        }
    }

    /// Output kind of a file written by [`run`], from its name.
    pub fn from_file_name(name: &str) -> Option<Output> {
        let stem = name.strip_suffix(".csv")?;
        Output::ALL.into_iter().find(|o| stem == o.name() || stem.ends_with(&format!("__{}", o.name())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepRange {
    /// Inclusive, evenly spaced.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Used in output file names; defaults to the target name.
    #[serde(default)]
    pub name: Option<String>,
    pub target: Target,
    pub range: SweepRange,
    pub outputs: Vec<Output>,
}

impl SweepSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.target.name().to_string())
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let r = &self.range;
        if r.points < 2 {
            return Err(Error::config(format!("{path}.range.points"), format!("must be >= 2, got {}", r.points)));
        }
        for (name, v) in [("start", r.start), ("stop", r.stop)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{path}.range.{name}"), format!("must be finite and >= 0, got {v}")));
            }
            if self.target == Target::PhiB && v > 1.0 {
                return Err(Error::config(format!("{path}.range.{name}"), format!("phase must lie in [0, 1], got {v}")));
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::config(format!("{path}.outputs"), "at least one output is required"));
        }
        if let Some(name) = &self.name {
            check_name(name, &format!("{path}.name"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSettings {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    /// Scale every spectrum to unit maximum before writing.
    pub normalize: bool,
    /// Peaks below this fraction of the maximum are not annotated.
    pub peak_threshold: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            omega_min: 0.05,
            omega_max: 2.2,
            points: 400,
            normalize: false,
            peak_threshold: 0.01,
        }
    }
}

impl SpectrumSettings {
    pub fn grid(&self) -> Vec<f64> {
        crate::spectra::omega_grid(self.omega_min, self.omega_max, self.points)
    }

    fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config("spectrum.points", format!("must be >= 2, got {}", self.points)));
        }
        if !(self.omega_min.is_finite() && self.omega_min > 0.0) {
            return Err(Error::config("spectrum.omega_min", "must be finite and > 0"));
        }
        if !(self.omega_max.is_finite() && self.omega_max > self.omega_min) {
            return Err(Error::config("spectrum.omega_max", "must be finite and > omega_min"));
        }
        if !(0.0..1.0).contains(&self.peak_threshold) {
            return Err(Error::config("spectrum.peak_threshold", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Named set of `[model]` overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    #[serde(flatten)]
    pub set: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub spectrum: SpectrumSettings,
    #[serde(default)]
    pub variant: Vec<Variant>,
    #[serde(default)]
    pub sweep: Vec<SweepSpec>,
    /// Outputs of the single-point run used when `sweep` is empty.
    #[serde(default)]
    pub outputs: Vec<Output>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].lines().count().max(1);
                    Error::Parse {
                        path: origin.to_path_buf(),
                        message: format!("line {line}: {message}"),
                    }
                }
                None => Error::Parse {
                    path: origin.to_path_buf(),
                    message,
                },
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text, path)
    }

    /// Resolved `(name, model)` pairs; a single `default` when no variants
    /// are given.
    pub fn variants(&self) -> Result<Vec<(String, ModelConfig)>> {
        if self.variant.is_empty() {
            return Ok(vec![("default".to_string(), self.model.clone())]);
        }
        let base = toml::Table::try_from(&self.model).map_err(|e| Error::config("model", e.to_string()))?;
        self.variant
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut table = base.clone();
                for (k, val) in &v.set {
                    if !base.contains_key(k) {
                        return Err(Error::config(format!("variant[{i}].{k}"), "unknown model field"));
                    }
                    table.insert(k.clone(), val.clone());
                }
                let cfg: ModelConfig = toml::Value::Table(table)
                    .try_into()
                    .map_err(|e: toml::de::Error| Error::config(format!("variant[{i}]"), e.message().to_string()))?;
                cfg.validate().map_err(|e| prefix_field(e, &format!("variant[{i}]")))?;
                Ok((v.name.clone(), cfg))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.spectrum.validate()?;
        let mut names = std::collections::BTreeSet::new();
        for (i, v) in self.variant.iter().enumerate() {
            check_name(&v.name, &format!("variant[{i}].name"))?;
            if !names.insert(v.name.clone()) {
                return Err(Error::config(format!("variant[{i}].name"), format!("duplicate variant `{}`", v.name)));
            }
        }
        let variants = self.variants()?;
        let mut labels = std::collections::BTreeSet::new();
        for (i, s) in self.sweep.iter().enumerate() {
            let path = format!("sweep[{i}]");
            s.validate(&path)?;
            if !labels.insert(s.label()) {
                return Err(Error::config(format!("{path}.name"), format!("duplicate sweep name `{}`", s.label())));
            }
            for (name, cfg) in &variants {
                s.target
                    .check_model(cfg.model)
                    .map_err(|m| Error::config(format!("{path}.target"), format!("variant `{name}`: {m}")))?;
                for v in s.range.values() {
                    s.target
                        .apply(cfg, v)
                        .validate()
                        .map_err(|e| prefix_field(e, &format!("{path} (variant `{name}`, value {v})")))?;
                }
                check_outputs(&s.outputs, cfg, &format!("{path}.outputs"))?;
            }
        }
        if self.sweep.is_empty() {
            if self.outputs.is_empty() {
                return Err(Error::config("outputs", "no sweeps given and no single-point outputs requested"));
            }
            for (_, cfg) in &variants {
                check_outputs(&self.outputs, cfg, "outputs")?;
            }
        }
        Ok(())
    }

    /// Digest of the canonical JSON form of the parsed configuration.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("run config serializes");
        short_digest(value.to_string().as_bytes())
    }
}

fn check_outputs(outputs: &[Output], cfg: &ModelConfig, path: &str) -> Result<()> {
    if outputs.contains(&Output::SpectrumSaa) && !matches!(cfg.model, ModelKind::Saa | ModelKind::SaaRwa) {
        return Err(Error::config(path, format!("spectrum_saa needs a sensing-atom model, got `{}`", cfg.model)));
    }
    Ok(())
}

fn check_name(name: &str, path: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.contains("__")
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !name.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, format!("`{name}` is not a valid file-name component")))
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}
