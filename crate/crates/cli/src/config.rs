//! Run and simulation configuration, read from TOML and overridable by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stagedtrees::causal::ThetaMode;
use stagedtrees::likelihood::DirichletMass;
use stagedtrees::priors::{NigParams, PriorSpec};
use stagedtrees::simulate::ProbScheme;
use stagedtrees::{ChainConfig, Error, Loss, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Every variable of the event tree, root first.
    pub ordering: Vec<String>,
    /// Contiguous suffix of `ordering` whose stagings are learned.
    pub modeled: Vec<String>,
    /// Real-valued columns feeding the covariate penalty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covariates: Vec<String>,
    /// Declared levels per variable; undeclared ones come from the data.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub levels: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalConfig {
    pub treatment: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treated_level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_level: Option<String>,
    #[serde(default)]
    pub theta: ThetaMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub kappa: f64,
    pub xi: f64,
    /// One weight per covariate; 1 for each when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub a: f64,
    pub nig: NigParams,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let spec = PriorSpec::default();
        Self {
            kappa: spec.kappa,
            xi: spec.xi,
            lambda: None,
            a: spec.a.into(),
            nig: spec.nig,
        }
    }
}

impl PriorConfig {
    pub fn spec(&self, n_covariates: usize) -> Result<PriorSpec> {
        let lambda = self.lambda.clone().unwrap_or_else(|| vec![1.0; n_covariates]);
        if lambda.len() != n_covariates {
            return Err(Error::InvalidPrior(format!(
                "{} lambda weights for {n_covariates} covariates",
                lambda.len()
            )));
        }
        let spec = PriorSpec {
            kappa: self.kappa,
            xi: self.xi,
            lambda,
            a: DirichletMass::new(self.a)?,
            nig: self.nig,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryConfig {
    pub loss: Loss,
    /// Credible level for the ball and the effect intervals.
    pub level: f64,
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Write every effect draw to `effect_draws.csv`.
    pub draws: bool,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            loss: Loss::Vi,
            level: 0.95,
            restarts: 16,
            max_sweeps: 100,
            draws: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal: Option<CausalConfig>,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub summary: SummaryConfig,
}

pub(crate) fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))
}

pub(crate) fn render_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Parse(e.to_string()))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        parse_toml(text, "run config")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        parse_toml(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        render_toml(self)
    }

    /// Checks numeric domains. Column checks happen once the data is read.
    pub fn validate(&self) -> Result<()> {
        self.prior.spec(self.data.covariates.len())?;
        self.chain.validate()?;
        let s = &self.summary;
        if !(s.level > 0.0 && s.level < 1.0) {
            return Err(Error::InvalidChain(format!("credible level must be in (0, 1), got {}", s.level)));
        }
        if s.restarts == 0 || s.max_sweeps == 0 {
            return Err(Error::InvalidChain("restarts and max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub output: PathBuf,
    /// Level counts of X0, X1, ...; ignored when `generator` is set.
    #[serde(default)]
    pub cardinalities: Vec<usize>,
    #[serde(default)]
    pub first_modeled: usize,
    /// Probability of each further random stage merge.
    #[serde(default)]
    pub merge_prob: f64,
    #[serde(default = "default_scheme")]
    pub scheme: ProbScheme,
    /// Generating tree JSON to use instead of drawing one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<PathBuf>,
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    /// Treatment and outcome for the truth file; the last two variables
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

fn default_scheme() -> ProbScheme {
    ProbScheme::ExpNormalized
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

impl SimulateConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        parse_toml(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        render_toml(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.n.contains(&0) {
            return Err(Error::InvalidGenerator("sample sizes must be nonempty and positive".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidGenerator("replicates must be at least 1".into()));
        }
        if self.generator.is_none() && self.cardinalities.len() < 2 {
            return Err(Error::InvalidGenerator("need at least two variables".into()));
        }
        Ok(())
    }

    /// One output per `(n, replicate)` pair goes to its own directory.
    pub fn is_sweep(&self) -> bool {
        self.n.len() > 1 || self.replicates > 1
    }
}
