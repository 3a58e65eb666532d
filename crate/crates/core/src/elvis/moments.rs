use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::household::{HouseholdPanel, LatentState};

/// Layout of the moment vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub periods: usize,
    /// Number of appended parameter moments.
    pub extra: usize,
    pub labels: Vec<String>,
}

impl MomentSpec {
    pub fn new(periods: usize) -> Self {
        let mut labels = Vec::with_capacity(3 * periods + 3);
        for name in ["me_childcare_1", "me_childcare_2", "me_child_exp"] {
            labels.extend((0..periods).map(|t| format!("{name}[{t}]")));
        }
        labels.extend((1..=3).map(|k| format!("var_alpha_{k}")));
        Self {
            periods,
            extra: 0,
            labels,
        }
    }

    pub fn with_extra(mut self, names: &[&str]) -> Self {
        self.extra += names.len();
        self.labels.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn d_m(&self) -> usize {
        3 * self.periods
    }

    pub fn d_v(&self) -> usize {
        3
    }

    pub fn dim(&self) -> usize {
        self.d_m() + self.d_v() + self.extra
    }

    pub fn check(&self, panel: &HouseholdPanel) -> Result<()> {
        if panel.periods() != self.periods || self.labels.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "moment spec for {} periods does not fit a panel with {}",
                self.periods,
                panel.periods()
            )));
        }
        Ok(())
    }
}

/// Population (divide-by-n) variance.
pub fn population_variance(v: &[f64]) -> f64 {
    if v.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Measurement errors followed by the time variances of the three elasticities.
pub fn moments_mv(panel: &HouseholdPanel, state: &LatentState) -> Vec<f64> {
    let mut g = state.measurement_errors(panel);
    g.extend(state.elasticity.iter().map(|a| population_variance(a)));
    g
}
