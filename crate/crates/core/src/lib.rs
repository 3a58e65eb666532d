//! Revealed-preference tests and production-technology inference for
//! collective households that produce child welfare.
//!
//! The crate is organised around six parts:
//!
//! * [`household`]: panel and latent-state types plus every deterministic
//!   model check (Afriat, GARP, GAPM, returns-to-scale bounds, price
//!   construction, production recovery).
//! * [`sampler`]: the blocked Gibbs sampler over the feasible latent space.
//! * [`elvis`]: averaged moments, the exponential-tilt minimisation, the test
//!   statistic and confidence-set inversion.
//! * [`synth`]: a forward solver that produces synthetic panels with known
//!   ground truth.
//! * [`pipeline`]: CSV ingestion and sample construction.
//! * [`cli`]: the batch front end used by the `collective` binary.

pub mod cli;
pub mod elvis;
pub mod error;
pub mod household;
pub mod pipeline;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use household::{HouseholdPanel, LatentState};
