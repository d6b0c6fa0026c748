//! Run configuration: one TOML document with a section per component.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! kg = "data/noisy"
//! output = "runs/a"
//!
//! [model]
//! mode = "typee"
//! epochs = 50
//!
//! [feedback]
//! max_iter = 6
//! ```
//!
//! Command-line flags are applied on top of the file. The global seed, when
//! given, replaces the seed of every stochastic component; each component
//! then draws from its own named stream.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::ModelConfig;
use crate::error::{Error, Result};
use crate::kg::SplitSpec;
use crate::noise::NoiseSpec;
use crate::pipeline::{FeedbackConfig, RefineConfig};
use crate::psl::{RuleWeights, SolverConfig};
use crate::synth::SynthSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Graph directory (`triples.tsv`, `labels.tsv`, `truth.tsv`,
    /// `noise.tsv`, `ontology/`).
    pub kg: Option<PathBuf>,
    /// Ontology directory, overriding `<kg>/ontology`.
    pub ontology: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub psl: RuleWeights,
    pub solver: SolverConfig,
    pub model: ModelConfig,
    pub feedback: FeedbackConfig,
    pub split: SplitSpec,
    pub noise: NoiseSpec,
    pub synth: SynthSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| e.with_context(&path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Pushes the global seed into every component.
    pub fn propagate_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.model.seed = seed;
            self.split.seed = seed;
            self.noise.seed = seed;
            self.synth.seed = seed;
            self.synth.noise.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psl.validate()?;
        self.model.validate()?;
        self.feedback.validate()?;
        self.split.validate()?;
        self.noise.validate()?;
        for (name, p) in [("kg", &self.paths.kg), ("ontology", &self.paths.ontology)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::Config(format!(
                        "{name} path {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn refine(&self) -> RefineConfig {
        RefineConfig {
            psl: self.psl.clone(),
            solver: self.solver.clone(),
            model: self.model.clone(),
            feedback: self.feedback.clone(),
        }
    }
}
