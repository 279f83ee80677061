use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use regime_core::domain::CostPolicy;
use regime_core::estimation::{OutcomeConfig, PropensityConfig};
use regime_core::mining::MiningConfig;
use regime_core::objective::ObjectiveWeights;
use regime_core::search::UctConfig;
use regime_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Uct,
    Greedy,
    Exhaustive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub n_subjects: usize,
    pub seed: u64,
    pub confounding_strength: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            n_subjects: 2000,
            seed: 0,
            confounding_strength: 0.5,
        }
    }
}

/// Everything a run needs. Loaded from `--config` (JSON, every field
/// optional), then overridden flag by flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to `<out_dir>/dataset.csv`.
    pub dataset: Option<PathBuf>,
    /// Defaults to `<out_dir>/schema.json`.
    pub schema: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mining: MiningConfig,
    pub propensity: PropensityConfig,
    pub outcome: OutcomeConfig,
    pub search: UctConfig,
    pub strategy: Strategy,
    pub default_cost_policy: CostPolicy,
    /// Shorthand for `default_cost_policy = charge_default_full`.
    pub charge_default_full: bool,
    pub generate: GenerateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            schema: None,
            out_dir: PathBuf::from("out"),
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            mining: MiningConfig {
                max_predicates: 2,
                ..MiningConfig::default()
            },
            propensity: PropensityConfig::default(),
            outcome: OutcomeConfig::default(),
            search: UctConfig::default(),
            strategy: Strategy::Uct,
            default_cost_policy: CostPolicy::Literal,
            charge_default_full: false,
            generate: GenerateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn weights(&self) -> ObjectiveWeights {
        ObjectiveWeights::new(self.lambda1, self.lambda2, self.lambda3)
    }

    pub fn policy(&self) -> CostPolicy {
        if self.charge_default_full {
            CostPolicy::ChargeDefaultFull
        } else {
            self.default_cost_policy
        }
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset
            .clone()
            .unwrap_or_else(|| self.out_dir.join("dataset.csv"))
    }

    pub fn schema_path(&self) -> PathBuf {
        self.schema
            .clone()
            .unwrap_or_else(|| self.out_dir.join("schema.json"))
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        self.mining.validate()?;
        self.propensity.validate()?;
        self.search.validate()?;
        if !(self.outcome.ridge >= 0.0 && self.outcome.ridge.is_finite()) {
            return Err(Error::Config(format!("ridge = {} must be ≥ 0", self.outcome.ridge)).into());
        }
        if !(0.0..=1.0).contains(&self.generate.confounding_strength) {
            return Err(Error::Config(format!(
                "confounding_strength = {} must lie in [0, 1]",
                self.generate.confounding_strength
            ))
            .into());
        }
        if self.generate.n_subjects == 0 {
            return Err(Error::Config("n_subjects must be ≥ 1".into()).into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation {
                location: path.display().to_string(),
                message: e.to_string(),
            })?;
        serde_json::from_str(&text).map_err(|e| {
            Error::Validation {
                location: format!("{}:{}:{}", path.display(), e.line(), e.column()),
                message: e.to_string(),
            }
            .into()
        })
    }
}

/// Flags shared by every verb; each overrides the matching config field.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    /// JSON run configuration; flags below take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dataset CSV (default: <out>/dataset.csv)
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Schema JSON (default: <out>/schema.json)
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Weight on the mean outcome (default: 1)
    #[arg(long, global = true)]
    pub lambda1: Option<f64>,
    /// Weight on the mean assessment cost (default: 1)
    #[arg(long, global = true)]
    pub lambda2: Option<f64>,
    /// Weight on the mean treatment cost (default: 1)
    #[arg(long, global = true)]
    pub lambda3: Option<f64>,
    /// Minimum pattern support as a fraction of rows (default: 0.05)
    #[arg(long, global = true)]
    pub min_support: Option<f64>,
    /// Maximum predicates per pattern (default: 2)
    #[arg(long, global = true)]
    pub max_predicates: Option<usize>,
    /// Quantile bins per real characteristic (default: 4)
    #[arg(long, global = true)]
    pub num_bins: Option<usize>,
    /// Propensity L2 penalty (default: 1e-4)
    #[arg(long, global = true)]
    pub lambda_reg: Option<f64>,
    /// Outcome ridge penalty (default: 1e-6)
    #[arg(long, global = true)]
    pub ridge: Option<f64>,
    /// Propensity clipping floor (default: 0.01)
    #[arg(long, global = true)]
    pub clip_epsilon: Option<f64>,
    /// Propensity gradient tolerance (default: 1e-6)
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Propensity iteration limit (default: 5000)
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Search iterations (default: 10000)
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// UCB1 exploration constant (default: 1.414)
    #[arg(long, global = true)]
    pub c_explore: Option<f64>,
    /// Seed for generation and search (default: 0)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Maximum number of rules (default: 5)
    #[arg(long, global = true)]
    pub l_max: Option<usize>,
    /// Minimum fraction of rows a new rule must newly cover (default: 0.01)
    #[arg(long, global = true)]
    pub min_new_coverage: Option<f64>,
    /// Bill default-group subjects for every characteristic in the list
    #[arg(long, global = true)]
    pub charge_default_full: bool,
    /// Search strategy (default: uct)
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<Strategy>,
    /// Independent search trees run in parallel (default: 1)
    #[arg(long, global = true)]
    pub parallel_roots: Option<usize>,
    /// Disable bound pruning
    #[arg(long, global = true)]
    pub no_prune: bool,
    /// Rollouts follow the greedy policy instead of uniform moves
    #[arg(long, global = true)]
    pub greedy_rollout: bool,
    /// Do not seed the incumbent with the greedy list
    #[arg(long, global = true)]
    pub no_warm_start: bool,
    /// Subjects to generate (default: 2000)
    #[arg(long, global = true)]
    pub n_subjects: Option<usize>,
    /// Dependence of the observed treatment on characteristics, in [0, 1] (default: 0.5)
    #[arg(long, global = true)]
    pub confounding_strength: Option<f64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| "reading run configuration")?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:ident => $($field:tt)+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field)+ = v;
                }
            };
        }
        if let Some(p) = &self.out {
            c.out_dir = p.clone();
        }
        if self.dataset.is_some() {
            c.dataset = self.dataset.clone();
        }
        if self.schema.is_some() {
            c.schema = self.schema.clone();
        }
        set!(lambda1 => lambda1);
        set!(lambda2 => lambda2);
        set!(lambda3 => lambda3);
        set!(min_support => mining.min_support);
        set!(max_predicates => mining.max_predicates);
        set!(num_bins => mining.num_bins);
        set!(lambda_reg => propensity.lambda_reg);
        set!(clip_epsilon => propensity.clip_epsilon);
        set!(tol => propensity.tol);
        set!(max_iters => propensity.max_iters);
        set!(ridge => outcome.ridge);
        set!(iterations => search.iterations);
        set!(c_explore => search.c_explore);
        set!(l_max => search.l_max);
        set!(min_new_coverage => search.min_new_coverage);
        set!(parallel_roots => search.parallel_roots);
        set!(strategy => strategy);
        set!(n_subjects => generate.n_subjects);
        set!(confounding_strength => generate.confounding_strength);
        if let Some(seed) = self.seed {
            c.search.seed = seed;
            c.generate.seed = seed;
        }
        c.charge_default_full |= self.charge_default_full;
        c.search.prune &= !self.no_prune;
        c.search.greedy_rollout |= self.greedy_rollout;
        c.search.warm_start &= !self.no_warm_start;
        c.validate()?;
        Ok(c)
    }
}
