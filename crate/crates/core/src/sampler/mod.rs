//! Blocked Gibbs sampler over the feasible latent space of one household,
//! with a Metropolis-Hastings correction towards a Gaussian target on the
//! measurement errors.

mod chain;
mod dump;
mod init;
mod project;
mod slice;
mod steps;

pub use chain::{household_seed, splitmix64, run_chain, run_chains, ChainDraws};
pub use dump::{read_dump, write_dump, DUMP_MAGIC, DUMP_VERSION};
pub use init::{initialize, initialize_error_start, solve_afriat, RTS_GRID};
pub use project::project_time_invariant;
pub use slice::BlockBounds;
pub use steps::{
    constraint_slacks, full_pass, mh_accept, production_ok, step1_lambda, step2_welfare_leisure_childcare,
    step3_utilities_prices, step4_child_expenditure, step5_deduce, mh_accept_norms, Block, BlockMove, PassOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Granularity of the Metropolis-Hastings correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptMode {
    /// One accept/reject per complete five-step pass.
    #[default]
    PerPass,
    /// Accept/reject after every block that moves a measurement error.
    PerBlock,
}

/// Which states a chain retains at each kept pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Retain {
    /// The chain state itself.
    Chain,
    /// The chain state and its feasible time-invariant projections.
    Augmented,
    /// Only the feasible time-invariant projections. Elasticity variances
    /// are non-negative, so a zero mean forces them to vanish almost surely
    /// and this restriction leaves the identified set unchanged.
    #[default]
    Projected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Upper end `L` of the multiplier support `[1, L]`.
    pub lambda_cap: f64,
    pub burn_in: usize,
    pub post_burn_draws: usize,
    pub thinning_keep_fraction: f64,
    pub rng_seed: u64,
    /// Standard deviation of each direction coordinate.
    pub direction_scale: f64,
    /// Fraction of each slice trimmed from both ends before drawing.
    pub margin: f64,
    pub accept_mode: AcceptMode,
    /// Preferred starting returns to scale; `None` searches [`RTS_GRID`]
    /// starting from the middle.
    pub rts0: Option<f64>,
    /// When the observed inputs admit no feasible start, start from
    /// time-invariant input shares and attribute the difference to
    /// measurement error instead of failing.
    pub error_start: bool,
    /// Projections are onto time-invariant output elasticities at the
    /// state's own returns to scale and at one drawn uniformly from `(0, 1)`.
    pub retain: Retain,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lambda_cap: 1e4,
            burn_in: 100_000,
            post_burn_draws: 100_000,
            thinning_keep_fraction: 0.05,
            rng_seed: 0,
            direction_scale: 1.0,
            margin: 1e-8,
            accept_mode: AcceptMode::PerPass,
            rts0: None,
            error_start: true,
            retain: Retain::Projected,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.thinning_keep_fraction > 0.0 && self.thinning_keep_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "thinning_keep_fraction must lie in (0, 1], got {}",
                self.thinning_keep_fraction
            )));
        }
        if !(self.lambda_cap > 1.0) {
            return Err(Error::Config(format!("lambda_cap must exceed 1, got {}", self.lambda_cap)));
        }
        if !(self.direction_scale > 0.0) || !(self.margin >= 0.0 && self.margin < 0.5) {
            return Err(Error::Config("direction_scale must be positive and margin in [0, 0.5)".into()));
        }
        if let Some(r) = self.rts0 {
            crate::household::check_rts(r)?;
        }
        Ok(())
    }

    /// Keep one pass in every `ceil(1 / keep_fraction)`.
    pub fn keep_every(&self) -> usize {
        (1.0 / self.thinning_keep_fraction - 1e-12).ceil().max(1.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_thinning_keeps_five_thousand() {
        let cfg = SamplerConfig::default();
        assert_eq!(cfg.keep_every(), 20);
        assert_eq!(cfg.post_burn_draws / cfg.keep_every(), 5000);
    }

    #[test]
    fn invalid_fraction_rejected() {
        let cfg = SamplerConfig {
            thinning_keep_fraction: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
