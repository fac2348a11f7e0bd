//! JSON run configuration. Each subcommand reads one config file; the shared
//! CLI flags override individual fields after parsing.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use pdstream::{ColumnType, HyperplaneConcept, RangeStrategy, StreamError};

fn default_cadence() -> u64 {
    1
}

fn default_learning_rate() -> f64 {
    0.01
}

fn default_alpha() -> f64 {
    0.001
}

fn default_grid_size() -> usize {
    20
}

fn default_delta() -> f64 {
    0.002
}

fn default_max_buckets() -> usize {
    5
}

fn default_steps() -> u64 {
    10_000
}

fn default_target_name() -> String {
    "y".to_owned()
}

/// Configuration for `explain` and `detect`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub source: SourceSpec,
    #[serde(default)]
    pub model: ModelSpec,
    /// Features to explain; defaults to the full source schema.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub pdp: PdpSpec,
    /// Per-feature replacements for the base `pdp` block.
    #[serde(default)]
    pub pdp_overrides: BTreeMap<String, PdpSpec>,
    #[serde(default)]
    pub detector: DetectorSpec,
    /// Serialize every Nth frame (explanations are computed every step).
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub order: TrainOrder,
    pub out: Option<PathBuf>,
}

/// Configuration for `batch-pdp`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub data: CsvSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub feature: String,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    pub out: Option<PathBuf>,
}

/// Configuration for `generate`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub source: SourceSpec,
    #[serde(default = "default_target_name")]
    pub target_name: String,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Synthetic two-feature classification stream with an optional sudden
    /// concept switch.
    Hyperplane {
        #[serde(default = "default_steps")]
        steps: u64,
        switch_at: Option<u64>,
        concept_a: Option<ConceptSpec>,
        concept_b: Option<ConceptSpec>,
    },
    Csv {
        path: PathBuf,
        target: String,
        /// Column type overrides: `"numeric"` or `"binary(a=0,b=1)"`.
        #[serde(default)]
        types: BTreeMap<String, String>,
    },
}

/// Per-field overrides over the built-in concept parameters.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptSpec {
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub sigma2_sq: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub mu_eps: Option<f64>,
    pub sigma_eps_sq: Option<f64>,
    pub tau: Option<f64>,
}

impl ConceptSpec {
    pub fn apply(&self, mut base: HyperplaneConcept) -> HyperplaneConcept {
        if let Some(v) = self.mu1 {
            base.mu1 = v;
        }
        if let Some(v) = self.mu2 {
            base.mu2 = v;
        }
        if let Some(v) = self.sigma1_sq {
            base.sigma1_sq = v;
        }
        if let Some(v) = self.sigma2_sq {
            base.sigma2_sq = v;
        }
        if let Some(v) = self.beta1 {
            base.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            base.beta2 = v;
        }
        if let Some(v) = self.mu_eps {
            base.mu_eps = v;
        }
        if let Some(v) = self.sigma_eps_sq {
            base.sigma_eps_sq = v;
        }
        if let Some(v) = self.tau {
            base.tau = v;
        }
        base
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSpec {
    pub path: PathBuf,
    pub target: String,
    #[serde(default)]
    pub types: BTreeMap<String, String>,
}

pub fn parse_type_map(
    types: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, ColumnType>, StreamError> {
    types
        .iter()
        .map(|(name, spec)| pdstream::parse_type_spec(&format!("{name}:{spec}")))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    SgdLogistic {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
    },
    SgdLinear {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::SgdLogistic {
            learning_rate: default_learning_rate(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdpSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub range: RangeSpec,
}

impl Default for PdpSpec {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            grid_size: default_grid_size(),
            range: RangeSpec::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RangeSpec {
    MinMax {
        #[serde(default = "default_min_max_window")]
        window: u64,
    },
    Quantile {
        #[serde(default = "default_q_low")]
        q_low: f64,
        #[serde(default = "default_q_high")]
        q_high: f64,
        #[serde(default = "default_reservoir_capacity")]
        capacity: usize,
        #[serde(default = "default_entrance_probability")]
        entrance_probability: f64,
    },
}

fn default_min_max_window() -> u64 {
    2000
}

fn default_q_low() -> f64 {
    0.05
}

fn default_q_high() -> f64 {
    0.95
}

fn default_reservoir_capacity() -> usize {
    100
}

fn default_entrance_probability() -> f64 {
    0.05
}

impl Default for RangeSpec {
    fn default() -> Self {
        RangeSpec::Quantile {
            q_low: default_q_low(),
            q_high: default_q_high(),
            capacity: default_reservoir_capacity(),
            entrance_probability: default_entrance_probability(),
        }
    }
}

impl RangeSpec {
    pub fn to_strategy(&self) -> RangeStrategy {
        match self {
            RangeSpec::MinMax { window } => RangeStrategy::MinMax { window: *window },
            RangeSpec::Quantile {
                q_low,
                q_high,
                capacity,
                entrance_probability,
            } => RangeStrategy::Quantile {
                q_low: *q_low,
                q_high: *q_high,
                capacity: *capacity,
                entrance_probability: *entrance_probability,
            },
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_max_buckets")]
    pub max_buckets: usize,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            max_buckets: default_max_buckets(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TrainOrder {
    /// Explain with the current model, then train on the observation.
    #[default]
    ExplainThenTrain,
    TrainThenExplain,
}
