use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{Algorithm, RunConfig};
use crate::stitcher::{CandidateFilter, StitchTrainConfig, DEFAULT_EXPANSION_BUDGET};
use crate::synthdata::{Preset, TabularTask, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Images,
    TwoSpirals,
    Rings,
}

impl DataKind {
    pub fn tabular(self) -> Option<TabularTask> {
        match self {
            DataKind::Images => None,
            DataKind::TwoSpirals => Some(TabularTask::TwoSpirals),
            DataKind::Rings => Some(TabularTask::Rings),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub samples: usize,
    /// Image classes; tabular tasks fix their own.
    pub classes: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DataKind::Images,
            samples: 2000,
            classes: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParentsConfig {
    pub preset: Preset,
    /// Initialization seed of parent A; parent B uses `seed + 1`.
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ParentsConfig {
    fn default() -> Self {
        ParentsConfig {
            preset: Preset::DeepShallow,
            seed: 0,
            train: TrainConfig {
                lr: 3e-3,
                sample_budget: 30_000,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StitchConfig {
    pub candidates: CandidateFilter,
    pub matching_budget: u64,
    /// Seed for the random initial stitch weights.
    pub build_seed: u64,
    pub train: StitchTrainConfig,
}

impl Default for StitchConfig {
    fn default() -> Self {
        StitchConfig {
            candidates: CandidateFilter::default(),
            matching_budget: DEFAULT_EXPANSION_BUDGET,
            build_seed: 0,
            train: StitchTrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub population_size: usize,
    pub budget: usize,
    pub time_limit_secs: Option<f64>,
    pub workers: usize,
    pub deterministic: bool,
    pub lk_min_neighborhood: usize,
    pub mutation: bool,
    /// Validation samples scored per evaluation; all of them when unset.
    pub eval_limit: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        SearchConfig {
            algorithm: run.algorithm,
            population_size: run.population_size,
            budget: run.budget,
            time_limit_secs: run.time_limit_secs,
            workers: run.workers,
            deterministic: run.deterministic,
            lk_min_neighborhood: run.lk_min_neighborhood,
            mutation: run.mutation,
            eval_limit: None,
        }
    }
}

impl SearchConfig {
    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            algorithm: self.algorithm,
            population_size: self.population_size,
            budget: self.budget,
            time_limit_secs: self.time_limit_secs,
            seed,
            workers: self.workers,
            deterministic: self.deterministic,
            lk_min_neighborhood: self.lk_min_neighborhood,
            mutation: self.mutation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { sizes: vec![8, 16, 32] }
    }
}

/// Everything one end-to-end experiment needs. Fields missing from the file
/// take their defaults; command-line flags override both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub data: DataConfig,
    pub parents: ParentsConfig,
    pub stitch: StitchConfig,
    pub search: SearchConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("out"),
            seeds: vec![0, 1, 2, 3, 4],
            data: DataConfig::default(),
            parents: ParentsConfig::default(),
            stitch: StitchConfig::default(),
            search: SearchConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::format("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.sweep.sizes.is_empty() {
            return Err(Error::Config("sweep sizes must not be empty".into()));
        }
        if self.stitch.candidates.stride == 0 {
            return Err(Error::Config("candidate stride must be ≥ 1".into()));
        }
        self.parents.train.validate()?;
        self.search.run_config(0).validate()
    }
}
