//! Synthetic households solved from known primitives, with controlled
//! measurement error, and the productivity-shock misspecification check.

mod demo;
mod population;
mod solve;

pub use demo::{misspecification_demo, no_shock_state, MisspecificationReport};
pub use population::{generate_population, write_population, GroundTruth, Population, PopulationSpec};
pub use solve::{solve_period, welfare_utility, HouseholdParams, PeriodSolution};
