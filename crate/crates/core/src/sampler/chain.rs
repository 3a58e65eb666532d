use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::steps::full_pass;
use super::{initialize, initialize_error_start, project_time_invariant, Retain, SamplerConfig};
use crate::elvis::moments_mv;
use crate::error::{Error, Result};
use crate::household::{HouseholdPanel, LatentState};

/// Retained draws of one household's chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub household_id: String,
    pub periods: usize,
    pub states: Vec<LatentState>,
    /// Cached measurement-error and elasticity-variance moments per state.
    pub mv_moments: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

impl ChainDraws {
    pub fn from_states(panel: &HouseholdPanel, states: Vec<LatentState>, acceptance_rate: f64) -> Self {
        let mv_moments = states.iter().map(|s| moments_mv(panel, s)).collect();
        Self {
            household_id: panel.id.clone(),
            periods: panel.periods(),
            states,
            mv_moments,
            acceptance_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-household RNG seed from the global seed and the household id.
pub fn household_seed(global: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(h ^ splitmix64(global))
}

/// Runs `burn_in + post_burn_draws` passes and keeps every
/// `ceil(1 / keep_fraction)`-th post-burn-in state.
pub fn run_chain(panel: &HouseholdPanel, cfg: &SamplerConfig) -> Result<ChainDraws> {
    cfg.validate()?;
    let mut state = match initialize(panel, cfg.rts0, cfg) {
        Err(Error::NoFeasibleRts(_)) if cfg.error_start => initialize_error_start(panel, cfg.rts0, cfg)?,
        other => other?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(household_seed(cfg.rng_seed, &panel.id));
    let mut aux = ChaCha8Rng::seed_from_u64(splitmix64(household_seed(cfg.rng_seed, &panel.id) ^ 0x5052_4f4a));
    let every = cfg.keep_every();
    let mut states = Vec::with_capacity(cfg.post_burn_draws / every + 1);
    let (mut decisions, mut accepted) = (0u64, 0u64);
    for r in 0..cfg.burn_in + cfg.post_burn_draws {
        let out = full_pass(panel, &mut state, cfg, &mut rng)?;
        decisions += out.decisions as u64;
        accepted += out.accepted as u64;
        if r >= cfg.burn_in && (r - cfg.burn_in + 1) % every == 0 {
            if cfg.retain != Retain::Projected {
                states.push(state.clone());
            }
            if cfg.retain != Retain::Chain {
                let other = aux.random_range(0.0..1.0);
                for r in [state.rts(), other] {
                    if let Some(q) = project_time_invariant(panel, &state, r, cfg.lambda_cap) {
                        states.push(q);
                    }
                }
            }
        }
    }
    if states.is_empty() && cfg.post_burn_draws >= every {
        return Err(Error::NoFeasibleRts(format!(
            "household {}: no retained state is feasible after projection",
            panel.id
        )));
    }
    let rate = if decisions == 0 { 1.0 } else { accepted as f64 / decisions as f64 };
    Ok(ChainDraws::from_states(panel, states, rate))
}

/// Independent chains for many households on the rayon pool, in input order.
pub fn run_chains(panels: &[HouseholdPanel], cfg: &SamplerConfig) -> Vec<Result<ChainDraws>> {
    panels.par_iter().map(|p| run_chain(p, cfg)).collect()
}
