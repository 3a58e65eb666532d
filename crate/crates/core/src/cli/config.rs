use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elvis::{CiConfig, Target};
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::sampler::SamplerConfig;
use crate::synth::PopulationSpec;

/// Everything that determines a run besides the input data. Loaded from a
/// TOML file; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Global seed; overrides the sampler and synthetic-population seeds.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub level: f64,
    /// A name as accepted by `--target`, or the tagged form.
    #[serde(deserialize_with = "target_name_or_tagged")]
    pub target: Target,
    pub pipeline: PipelineConfig,
    pub sampler: SamplerConfig,
    pub ci: CiConfig,
    pub synth: PopulationSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: None,
            seed: None,
            jobs: None,
            level: 0.95,
            target: Target::Rts,
            pipeline: PipelineConfig::default(),
            sampler: SamplerConfig::default(),
            ci: CiConfig::default(),
            synth: PopulationSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copies the global seed into the sampler and generator and checks ranges.
    pub fn finalize(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.sampler.rng_seed = seed;
            self.synth.seed = seed;
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        self.sampler.validate()?;
        Ok(self)
    }
}

/// Parses `rts`, `alpha1`..`alpha3` or `beta0`, `beta1`, ...
pub fn parse_target(s: &str) -> std::result::Result<Target, String> {
    let s = s.trim().to_ascii_lowercase();
    if s == "rts" {
        return Ok(Target::Rts);
    }
    if let Some(k) = s.strip_prefix("alpha") {
        return match k.parse::<usize>() {
            Ok(k @ 1..=3) => Ok(Target::Elasticity(k - 1)),
            _ => Err(format!("elasticity index must be 1, 2 or 3 in `{s}`")),
        };
    }
    if let Some(k) = s.strip_prefix("beta") {
        return k
            .parse::<usize>()
            .map(Target::Coefficient)
            .map_err(|_| format!("bad coefficient index in `{s}`"));
    }
    Err(format!("unknown target `{s}`; expected rts, alpha1..alpha3 or betaK"))
}

fn target_name_or_tagged<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Target, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Tagged(Target),
    }
    match Repr::deserialize(d)? {
        Repr::Name(s) => parse_target(&s).map_err(serde::de::Error::custom),
        Repr::Tagged(t) => Ok(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            seed: Some(9),
            target: Target::Coefficient(2),
            ..Default::default()
        };
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_toml("target = \"alpha2\"").unwrap().target, Target::Elasticity(1));
        assert!(RunConfig::from_toml("target = \"gamma\"").is_err());
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::from_toml("level = 0.9\n[sampler]\nburn_in = 10\n").unwrap();
        assert_eq!(cfg.level, 0.9);
        assert_eq!(cfg.sampler.burn_in, 10);
        assert_eq!(cfg.sampler.post_burn_draws, SamplerConfig::default().post_burn_draws);
    }

    #[test]
    fn unknown_key_is_ignored_but_bad_type_fails() {
        assert!(RunConfig::from_toml("level = \"high\"").is_err());
    }

    #[test]
    fn seed_propagates() {
        let cfg = RunConfig {
            seed: Some(5),
            ..Default::default()
        }
        .finalize()
        .unwrap();
        assert_eq!((cfg.sampler.rng_seed, cfg.synth.seed), (5, 5));
    }

    #[test]
    fn targets_parse() {
        assert_eq!(parse_target("RTS"), Ok(Target::Rts));
        assert_eq!(parse_target("alpha3"), Ok(Target::Elasticity(2)));
        assert_eq!(parse_target("beta0"), Ok(Target::Coefficient(0)));
        assert!(parse_target("alpha4").is_err());
        assert!(parse_target("gamma").is_err());
    }
}
