//! Experiment config files (TOML). The schema is described in `docs/config.md`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionConfig;
use crate::domain::Bounds;
use crate::error::{AboError, Result};
use crate::influence::DEFAULT_RANK_TOL;
use crate::objectives::{InnerFunction, ObjectiveKind, ObjectiveSpec};
use crate::optimizer::{Method, OptimizerConfig};
use crate::similarity::{SimilaritySpec, DEFAULT_SIGMA_MIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Relative paths are resolved against the config file's directory.
    pub output_dir: PathBuf,
    pub methods: Vec<MethodConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub label: String,
    pub method: Method,
    pub budget: usize,
    pub init_design_size: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_true")]
    pub normalize_values: bool,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    pub objective: ObjectiveConfig,
}

fn default_true() -> bool {
    true
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityVariant {
    Rbf,
    SymKlGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    pub variant: SimilarityVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    /// Defaults to the smallest constant keeping the score non-negative on the box.
    #[serde(default, rename = "const", skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_sigma_min")]
    pub sigma_min: f64,
}

fn default_sigma_min() -> f64 {
    DEFAULT_SIGMA_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveVariant {
    Quadratic,
    BraninNegated,
    McExpectation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub variant: ObjectiveVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_mc: Option<usize>,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Config problems, split by the exit code they map to.
#[derive(Debug)]
pub enum ConfigError {
    /// Unreadable file or invalid TOML / schema.
    Parse(String),
    /// Well-formed but semantically invalid.
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl SimilarityConfig {
    pub fn build(&self, bounds: &Bounds) -> Result<SimilaritySpec> {
        match self.variant {
            SimilarityVariant::Rbf => {
                let l = self
                    .lengthscale
                    .ok_or_else(|| AboError::invalid("similarity.lengthscale", "required for rbf"))?;
                SimilaritySpec::rbf(l, self.noise)
            }
            SimilarityVariant::SymKlGaussian => {
                let d = bounds.dim();
                if !d.is_multiple_of(2) {
                    return Err(AboError::invalid(
                        "bounds",
                        "sym_kl_gaussian needs [means; variances] of even length",
                    ));
                }
                match self.constant {
                    Some(c) => SimilaritySpec::sym_kl(c, d / 2, self.sigma_min, self.noise),
                    None => SimilaritySpec::sym_kl_for_box(bounds, self.sigma_min, self.noise),
                }
            }
        }
    }
}

impl ObjectiveConfig {
    pub fn build(&self, seed_offset: u64) -> Result<ObjectiveSpec> {
        let kind = match self.variant {
            ObjectiveVariant::Quadratic => ObjectiveKind::Quadratic {
                center: self
                    .center
                    .clone()
                    .ok_or_else(|| AboError::invalid("objective.center", "required for quadratic"))?,
            },
            ObjectiveVariant::BraninNegated => ObjectiveKind::BraninNegated,
            ObjectiveVariant::McExpectation => ObjectiveKind::McExpectation {
                inner: self.inner.unwrap_or(InnerFunction::NegSquaredNorm),
                n_mc: self
                    .n_mc
                    .ok_or_else(|| AboError::invalid("objective.n_mc", "required for mc_expectation"))?,
            },
        };
        ObjectiveSpec::new(kind, self.noise_std, self.seed.wrapping_add(seed_offset))
    }
}

impl MethodConfig {
    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::new(self.lower.clone(), self.upper.clone())
    }

    pub fn optimizer_config(&self, seed: u64) -> Result<OptimizerConfig> {
        let bounds = self.bounds()?;
        let similarity = self.similarity.build(&bounds)?;
        Ok(OptimizerConfig {
            budget: self.budget,
            init_design_size: self.init_design_size,
            seed,
            bounds,
            method: self.method,
            similarity,
            acquisition: self.acquisition.clone(),
            normalize_values: self.normalize_values,
            rank_tol: self.rank_tol,
        })
    }

    fn validate(&self) -> Result<()> {
        let cfg = self.optimizer_config(0)?;
        cfg.validate()?;
        let objective = self.objective.build(0)?;
        if let Some(d) = objective.dim() {
            if d != cfg.bounds.dim() {
                return Err(AboError::DimensionMismatch {
                    expected: d,
                    got: cfg.bounds.dim(),
                });
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.methods.is_empty() {
            return invalid("at least one [[methods]] entry is required".into());
        }
        if self.seeds.is_empty() {
            return invalid("seeds must not be empty".into());
        }
        let mut seen_seeds = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen_seeds.insert(**s)) {
            return invalid(format!("seed {s} listed twice"));
        }
        let mut labels = HashSet::new();
        for m in &self.methods {
            if m.label.is_empty() || !m.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return invalid(format!("label {:?} must be non-empty and use only [A-Za-z0-9_-]", m.label));
            }
            if !labels.insert(m.label.as_str()) {
                return invalid(format!("duplicate method label {:?}", m.label));
            }
            if let Err(e) = m.validate() {
                return invalid(format!("method {:?}: {e}", m.label));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
name = "smoke"
seeds = [1]
output_dir = "out"

[[methods]]
label = "abo"
method = "abo"
budget = 10
init_design_size = 4
lower = [-1.0, -1.0]
upper = [1.0, 1.0]

[methods.similarity]
variant = "rbf"
lengthscale = 0.5
noise = 1e-4

[methods.objective]
variant = "quadratic"
center = [0.2, 0.1]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.methods[0].acquisition, AcquisitionConfig::default());
        assert!(c.methods[0].normalize_values);
        assert_eq!(c.methods[0].similarity.sigma_min, DEFAULT_SIGMA_MIN);
    }

    #[test]
    fn parse_and_validation_errors_are_distinguished() {
        assert!(matches!(ExperimentConfig::from_toml("name = "), Err(ConfigError::Parse(_))));
        let unknown = MINIMAL.replace("budget = 10", "budget = 10\nbudgte = 3");
        assert!(matches!(ExperimentConfig::from_toml(&unknown), Err(ConfigError::Parse(_))));
        let bad_budget = MINIMAL.replace("budget = 10", "budget = 2");
        assert!(matches!(ExperimentConfig::from_toml(&bad_budget), Err(ConfigError::Invalid(_))));
        let bad_label = MINIMAL.replace("label = \"abo\"", "label = \"a b\"");
        assert!(matches!(ExperimentConfig::from_toml(&bad_label), Err(ConfigError::Invalid(_))));
        let no_seeds = MINIMAL.replace("seeds = [1]", "seeds = []");
        assert!(matches!(ExperimentConfig::from_toml(&no_seeds), Err(ConfigError::Invalid(_))));
        let wrong_dim = MINIMAL.replace("center = [0.2, 0.1]", "center = [0.2]");
        assert!(matches!(ExperimentConfig::from_toml(&wrong_dim), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let start = MINIMAL.find("[[methods]]").unwrap();
        let twice = format!("{MINIMAL}\n{}", &MINIMAL[start..]);
        assert!(matches!(ExperimentConfig::from_toml(&twice), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn sym_kl_constant_defaults_from_box() {
        let text = r#"
name = "kl"
seeds = [0]
output_dir = "o"
[[methods]]
label = "kl"
method = "abo"
budget = 6
init_design_size = 3
lower = [-1.0, -1.0, 0.01, 0.01]
upper = [1.0, 1.0, 1.0, 1.0]
[methods.similarity]
variant = "sym_kl_gaussian"
sigma_min = 0.01
[methods.objective]
variant = "mc_expectation"
n_mc = 10
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let b = c.methods[0].bounds().unwrap();
        let built = c.methods[0].similarity.build(&b).unwrap();
        assert_eq!(built, SimilaritySpec::sym_kl_for_box(&b, 0.01, 0.0).unwrap());
    }
}
