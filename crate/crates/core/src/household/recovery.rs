use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One household-period of a cross-section: inputs `(h1, h2, c)`, wages,
/// total input expenditure and returns to scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionObs {
    pub inputs: [f64; 3],
    pub wages: [f64; 2],
    pub expenditure: f64,
    pub rts: f64,
}

impl CrossSectionObs {
    /// Marginal products of log production, `w_k / (P W)` with `P W = E / RTS`.
    fn log_marginal_products(&self) -> [f64; 3] {
        let pw = self.expenditure / self.rts;
        [self.wages[0] / pw, self.wages[1] / pw, 1.0 / pw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    /// Multiplier on the rule-of-thumb bandwidth `sd(log x) n^(-1/7)`.
    pub bandwidth_scale: f64,
    /// Quadrature steps per path leg.
    pub steps: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            bandwidth_scale: 1.0,
            steps: 200,
        }
    }
}

struct Smoother {
    logs: Vec<[f64; 3]>,
    targets: Vec<[f64; 3]>,
    inv_bw: [f64; 3],
}

impl Smoother {
    fn new(obs: &[CrossSectionObs], cfg: &RecoveryConfig) -> Self {
        let n = obs.len() as f64;
        let logs: Vec<[f64; 3]> = obs.iter().map(|o| o.inputs.map(f64::ln)).collect();
        let mut inv_bw = [0.0; 3];
        for k in 0..3 {
            let mean = logs.iter().map(|l| l[k]).sum::<f64>() / n;
            let var = logs.iter().map(|l| (l[k] - mean).powi(2)).sum::<f64>() / n;
            let bw = cfg.bandwidth_scale * var.sqrt().max(1e-12) * n.powf(-1.0 / 7.0);
            inv_bw[k] = 1.0 / bw;
        }
        Self {
            logs,
            targets: obs.iter().map(|o| o.log_marginal_products()).collect(),
            inv_bw,
        }
    }

    /// Gaussian product-kernel average of the `k`-th marginal product at `x`.
    fn estimate(&self, x: [f64; 3], k: usize) -> f64 {
        let lx = x.map(f64::ln);
        let mut num = 0.0;
        let mut den = 0.0;
        for (l, y) in self.logs.iter().zip(&self.targets) {
            let mut d2 = 0.0;
            for j in 0..3 {
                let u = (l[j] - lx[j]) * self.inv_bw[j];
                d2 += u * u;
            }
            let w = (-0.5 * d2).exp();
            num += w * y[k];
            den += w;
        }
        num / den
    }
}

/// Expected log production on `grid`, normalised to zero at `grid[0]`.
///
/// Partial derivatives `E[w_k / (P W) | x]` are estimated by kernel
/// averaging and integrated from `grid[0]` along `h1`, then `h2`, then `c`.
pub fn recover_log_production(
    obs: &[CrossSectionObs],
    grid: &[[f64; 3]],
    cfg: &RecoveryConfig,
) -> Result<Vec<f64>> {
    if obs.is_empty() || grid.is_empty() {
        return Ok(vec![0.0; grid.len()]);
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for o in obs {
        for k in 0..3 {
            lo[k] = lo[k].min(o.inputs[k]);
            hi[k] = hi[k].max(o.inputs[k]);
        }
    }
    for g in grid {
        if (0..3).any(|k| !(g[k] >= lo[k] && g[k] <= hi[k])) {
            return Err(Error::OutsideSupport(g.to_vec()));
        }
    }
    let sm = Smoother::new(obs, cfg);
    let base = grid[0];
    let steps = cfg.steps.max(2);
    let out = grid
        .iter()
        .map(|g| {
            let mut point = base;
            let mut total = 0.0;
            for k in 0..3 {
                let (a, b) = (point[k], g[k]);
                if a != b {
                    let h = (b - a) / steps as f64;
                    let mut acc = 0.0;
                    for j in 0..=steps {
                        let mut x = point;
                        x[k] = a + h * j as f64;
                        let wgt = if j == 0 || j == steps { 0.5 } else { 1.0 };
                        acc += wgt * sm.estimate(x, k);
                    }
                    total += acc * h;
                }
                point[k] = b;
            }
            total
        })
        .collect();
    Ok(out)
}
