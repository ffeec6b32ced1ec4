use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use ugrasp::dropoutnet::{AdamConfig, NetworkSpec, TrainConfig};
use ugrasp::planner::PlanConfig;
use ugrasp::simlab::{DatasetConfig, ExperimentConfig};

/// Everything a run needs except the seed, which only comes from `--seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub train: TrainSection,
    pub plan: PlanSection,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Dropout rate the network is trained (and later sampled) with.
    pub dropout_rate: f64,
    pub adam: AdamConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { learning_rate: 3e-3, batch_size: 32, epochs: 40, dropout_rate: 0.2, adam: AdamConfig::default() }
    }
}

impl TrainSection {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            dropout_rate: self.dropout_rate,
            adam: self.adam,
            seed,
        }
    }

    pub fn network(&self, grid: usize) -> NetworkSpec {
        NetworkSpec::hourglass(grid, self.dropout_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanSection {
    /// Dropout samples drawn per plan.
    pub samples: usize,
    /// Grasps printed after planning.
    pub top: usize,
    #[serde(flatten)]
    pub config: PlanConfig,
}

impl Default for PlanSection {
    fn default() -> Self {
        Self { samples: 10, top: 5, config: PlanConfig::default() }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.dataset.validate()?;
        self.train.with_seed(0).validate()?;
        self.train.network(self.dataset.grid).validate()?;
        self.plan.config.validate()?;
        if self.plan.samples == 0 {
            bail!("plan.samples must be >= 1");
        }
        self.experiment.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../../../configs/example.toml");

    #[test]
    fn committed_example_is_the_default() {
        assert_eq!(RunConfig::from_toml(EXAMPLE).unwrap(), RunConfig::default());
    }

    #[test]
    fn parse_serialize_parse_is_identity() {
        let mut cfg = RunConfig::default();
        cfg.dataset.grid = 8;
        cfg.train.learning_rate = 1.0 / 3.0;
        cfg.plan.config.eval.mu = 0.1 + 0.2;
        cfg.experiment.dropout_rate = Some(0.0);
        cfg.experiment.splits = vec![ugrasp::simlab::Split::HoldoutModels];
        for c in [RunConfig::default(), cfg] {
            let once = RunConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(once, c);
            assert_eq!(once.to_toml(), c.to_toml());
        }
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for bad in [
            "[dataset]\ngrid = 10\n",
            "[train]\nlearning_rate = -1.0\n",
            "[plan]\nsamples = 0\n",
            "[experiment]\nsplits = []\n",
            "[experiment]\ndropout_rate = 1.5\n",
            "[trian]\nepochs = 1\n",
        ] {
            assert!(RunConfig::from_toml(bad).is_err(), "{bad}");
        }
    }
}
