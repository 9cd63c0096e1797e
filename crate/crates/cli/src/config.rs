//! JSON experiment descriptors.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use renewal_core::chain::{RenewalChain, ReturnLaw};
use renewal_core::dynsys::{McConfig, Sampler};
use renewal_core::evolve::{log_grid, Observable, SignedDistribution, TailDecay};
use serde::Deserialize;

/// Raised for anything wrong with the descriptor itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    pub output_dir: Option<PathBuf>,

    pub grid: Option<GridConfig>,
    pub n_list: Option<Vec<u64>>,
    pub window: Option<[u64; 2]>,
    pub fit: Option<FitKind>,
    pub tolerance: Option<f64>,

    pub initial: Option<InitialConfig>,
    pub observable: Option<ObservableConfig>,
    pub observable_v: Option<ObservableConfig>,

    pub z: Option<Vec<[f64; 2]>>,
    pub lambda: Option<[f64; 2]>,
    pub dim: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub i: Option<usize>,
    pub j: Option<usize>,

    pub seed: Option<u64>,
    pub orbit_length: Option<u64>,
    pub burn_in: Option<u64>,
    pub streams: Option<usize>,
    pub batches: Option<usize>,
    pub sampler: Option<SamplerKind>,
    pub x0: Option<f64>,
    pub steps: Option<usize>,
    pub a: Option<f64>,
    pub n_max: Option<u64>,
    pub samples: Option<u64>,
    pub i_max: Option<usize>,

    pub gamma: Option<f64>,
    pub n: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub law: LawConfig,
    pub truncation: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    Geometric {
        q: f64,
    },
    Zeta {
        degree: f64,
        #[serde(default)]
        log_power: f64,
    },
    Finite {
        probs: Vec<f64>,
    },
    Custom {
        probs: Vec<f64>,
        tail_exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: u64,
    pub hi: u64,
    #[serde(default = "default_per_decade")]
    pub per_decade: usize,
}

fn default_per_decade() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Power,
    Semilog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Float,
    Chain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    PointMass { state: usize },
    Stationary,
    Prefix { weights: Vec<f64> },
    Tilted { observable: ObservableConfig },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    Indicator {
        state: usize,
    },
    CenteredIndicator {
        state: usize,
    },
    Constant {
        value: f64,
    },
    Values {
        values: Vec<f64>,
        #[serde(default)]
        u_inf: f64,
    },
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_slice(&bytes).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.chain.truncation == 0 {
            return Err(config_error("chain.truncation must be positive"));
        }
        if self.grid.is_some() && self.n_list.is_some() {
            return Err(config_error("give either grid or n_list, not both"));
        }
        if let Some(g) = self.grid {
            if g.lo == 0 || g.hi < g.lo || g.per_decade == 0 {
                return Err(config_error("grid needs 1 <= lo <= hi and per_decade >= 1"));
            }
        }
        if let Some([lo, hi]) = self.window {
            if lo == 0 || hi <= lo {
                return Err(config_error("window needs 1 <= lo < hi"));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(config_error("tolerance must be positive"));
            }
        }
        Ok(())
    }

    pub fn law(&self) -> ReturnLaw {
        match &self.chain.law {
            LawConfig::Geometric { q } => ReturnLaw::geometric(*q),
            LawConfig::Zeta { degree, log_power } => ReturnLaw::zeta(*degree, *log_power),
            LawConfig::Finite { probs } => ReturnLaw::finite(probs.clone()),
            LawConfig::Custom { probs, tail_exponent } => ReturnLaw::custom(probs.clone(), *tail_exponent),
        }
    }

    /// Evaluation grid: `n_list`, else `grid`, else `default`.
    pub fn n_grid(&self, default: Option<(u64, u64)>) -> anyhow::Result<Vec<u64>> {
        if let Some(list) = &self.n_list {
            return Ok(list.clone());
        }
        let g = match (self.grid, default) {
            (Some(g), _) => g,
            (None, Some((lo, hi))) => GridConfig {
                lo,
                hi,
                per_decade: default_per_decade(),
            },
            (None, None) => return Err(config_error("this command needs grid or n_list")),
        };
        Ok(log_grid(g.lo, g.hi, g.per_decade))
    }

    pub fn require<T: Copy>(&self, value: Option<T>, name: &str) -> anyhow::Result<T> {
        value.ok_or_else(|| config_error(format!("this command needs `{name}`")))
    }

    pub fn initial(&self, chain: &RenewalChain) -> anyhow::Result<SignedDistribution> {
        let init = self.initial.clone().unwrap_or(InitialConfig::PointMass { state: 1 });
        Ok(match init {
            InitialConfig::PointMass { state } => SignedDistribution::point_mass(chain, state)?,
            InitialConfig::Stationary => SignedDistribution::stationary(chain),
            InitialConfig::Prefix { weights } => {
                SignedDistribution::from_prefix(chain, weights, TailDecay::FiniteSupport)?
            }
            InitialConfig::Tilted { observable } => {
                SignedDistribution::tilted_by(chain, &observable.build(chain)?)?
            }
        })
    }

    pub fn observable(&self, chain: &RenewalChain, centered_default: bool) -> anyhow::Result<Observable> {
        observable_or(self.observable.as_ref(), chain, centered_default)
    }

    pub fn observable_v(&self, chain: &RenewalChain) -> anyhow::Result<Observable> {
        match &self.observable_v {
            Some(v) => v.build(chain),
            None => self.observable(chain, true),
        }
    }

    pub fn mc(&self) -> McConfig {
        let d = McConfig::default();
        McConfig {
            orbit_length: self.orbit_length.unwrap_or(d.orbit_length),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            seed: self.seed.unwrap_or(d.seed),
            streams: self.streams.unwrap_or(d.streams),
            batches: self.batches.unwrap_or(d.batches),
        }
    }

    pub fn sampler(&self) -> Sampler {
        match self.sampler.unwrap_or(SamplerKind::Float) {
            SamplerKind::Float => Sampler::FloatOrbit,
            SamplerKind::Chain => Sampler::ChainSampled,
        }
    }

    pub fn z_points(&self) -> anyhow::Result<Vec<Complex64>> {
        let z = self.z.as_ref().ok_or_else(|| config_error("this command needs `z`"))?;
        Ok(z.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
    }
}

fn observable_or(cfg: Option<&ObservableConfig>, chain: &RenewalChain, centered: bool) -> anyhow::Result<Observable> {
    match cfg {
        Some(o) => o.build(chain),
        None if centered => Ok(Observable::centered_indicator(chain, 1)),
        None => Ok(Observable::indicator(1)),
    }
}

impl ObservableConfig {
    pub fn build(&self, chain: &RenewalChain) -> anyhow::Result<Observable> {
        Ok(match self {
            ObservableConfig::Indicator { state } | ObservableConfig::CenteredIndicator { state } if *state == 0 => {
                return Err(config_error("observable states are 1-based"));
            }
            ObservableConfig::Indicator { state } => Observable::indicator(*state),
            ObservableConfig::CenteredIndicator { state } => Observable::centered_indicator(chain, *state),
            ObservableConfig::Constant { value } => Observable::constant(*value),
            ObservableConfig::Values { values, u_inf } => Observable::new(values.clone(), *u_inf)?,
        })
    }
}
