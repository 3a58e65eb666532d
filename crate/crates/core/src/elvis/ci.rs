use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optimize::{chi2_quantile, MomentPanel, OptimizerConfig};
use super::tilt::DrawMatrix;
use crate::error::{Error, Result};
use crate::household::{HouseholdPanel, LatentState};
use crate::sampler::ChainDraws;

/// Scalar parameter whose confidence set is inverted from the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "index")]
pub enum Target {
    /// Expected returns to scale.
    Rts,
    /// Expected elasticity of input `k` (0: father time, 1: mother time, 2: expenditure).
    Elasticity(usize),
    /// Coefficient `k` of the regression of returns to scale on an intercept
    /// followed by the panel covariates.
    Coefficient(usize),
}

/// Cached draws of one household in the form the estimator needs.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdSample {
    pub mv: DrawMatrix,
    pub rts: Vec<f64>,
    pub alpha: [Vec<f64>; 3],
    /// Regression design row: intercept then covariates.
    pub design: Vec<f64>,
}

impl HouseholdSample {
    pub fn new(panel: &HouseholdPanel, draws: &ChainDraws) -> Result<Self> {
        Ok(Self {
            mv: DrawMatrix::from_rows(&draws.mv_moments)?,
            rts: draws.states.iter().map(LatentState::rts).collect(),
            alpha: [0, 1, 2].map(|k| draws.states.iter().map(|s| s.mean_elasticity(k)).collect()),
            design: design_row(panel),
        })
    }

    fn quantity(&self, target: Target) -> &[f64] {
        match target {
            Target::Rts | Target::Coefficient(_) => &self.rts,
            Target::Elasticity(k) => &self.alpha[k],
        }
    }

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn design_row(panel: &HouseholdPanel) -> Vec<f64> {
    std::iter::once(1.0).chain(panel.covariates.iter().copied()).collect()
}

/// Regression moments `X_k (RTS - X beta)` for one state.
pub fn regression_moments(panel: &HouseholdPanel, state: &LatentState, beta: &[f64]) -> Result<Vec<f64>> {
    let x = design_row(panel);
    if x.len() != beta.len() {
        return Err(Error::Dimension(format!("beta has {} entries, design {}", beta.len(), x.len())));
    }
    let omega = state.rts() - x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
    Ok(x.iter().map(|xk| xk * omega).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub target: Target,
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
    pub point_estimate: f64,
    pub df: usize,
    pub critical_value: f64,
    /// Every evaluated `(theta, statistic)`, sorted by `theta`.
    pub scan_trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CiConfig {
    pub optimizer: OptimizerConfig,
    /// Endpoint tolerance.
    pub tol: f64,
    /// Initial outward step.
    pub step: f64,
}

impl Default for CiConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            tol: 1e-3,
            step: 0.05,
        }
    }
}

fn design_matrix(samples: &[HouseholdSample]) -> Result<DMatrix<f64>> {
    let k = samples[0].design.len();
    if samples.iter().any(|s| s.design.len() != k) {
        return Err(Error::Dimension("households disagree on covariate count".into()));
    }
    let x = DMatrix::from_fn(samples.len(), k, |j, c| samples[j].design[c]);
    let sv = x.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let rank = sv.iter().filter(|v| **v > 1e-10 * top.max(1e-300)).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    Ok(x)
}

/// Least squares of `y` on the columns of `x`.
fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    x.clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .map_err(|e| Error::Numeric(e.to_string()))
}

struct Problem<'a> {
    samples: &'a [HouseholdSample],
    target: Target,
    design: Option<DMatrix<f64>>,
    means: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(samples: &'a [HouseholdSample], target: Target) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Dimension("no households".into()));
        }
        let design = match target {
            Target::Coefficient(k) => {
                let x = design_matrix(samples)?;
                if k >= x.ncols() {
                    return Err(Error::Dimension(format!("coefficient {k} out of range")));
                }
                Some(x)
            }
            Target::Elasticity(k) if k >= 3 => {
                return Err(Error::Dimension(format!("elasticity {k} out of range")));
            }
            _ => None,
        };
        let means = DVector::from_iterator(
            samples.len(),
            samples.iter().map(|s| HouseholdSample::mean(s.quantity(target))),
        );
        Ok(Self { samples, target, design, means })
    }

    /// Coefficients with entry `k` fixed at `theta` and the rest fitted by
    /// least squares on household means.
    fn beta(&self, x: &DMatrix<f64>, k: usize, theta: f64) -> Result<Vec<f64>> {
        let y = &self.means - x.column(k) * theta;
        let rest: Vec<usize> = (0..x.ncols()).filter(|c| *c != k).collect();
        let xr = x.select_columns(&rest);
        let b = ols(&xr, &y)?;
        let mut out = vec![0.0; x.ncols()];
        out[k] = theta;
        for (i, c) in rest.iter().enumerate() {
            out[*c] = b[i];
        }
        Ok(out)
    }

    fn point_estimate(&self) -> Result<f64> {
        match (self.target, &self.design) {
            (Target::Coefficient(k), Some(x)) => Ok(ols(x, &self.means)?[k]),
            _ => Ok(self.means.mean()),
        }
    }

    fn panel(&self, theta: f64) -> Result<MomentPanel> {
        let ms = match (self.target, &self.design) {
            (Target::Coefficient(k), Some(x)) => {
                let beta = self.beta(x, k, theta)?;
                self.samples
                    .iter()
                    .map(|s| {
                        let fit: f64 = s.design.iter().zip(&beta).map(|(a, b)| a * b).sum();
                        let cols: Vec<Vec<f64>> = s
                            .design
                            .iter()
                            .map(|xk| s.rts.iter().map(|q| xk * (q - fit)).collect())
                            .collect();
                        s.mv.append(&cols)
                    })
                    .collect()
            }
            _ => self
                .samples
                .iter()
                .map(|s| s.mv.append(&[s.quantity(self.target).iter().map(|q| q - theta).collect()]))
                .collect(),
        };
        MomentPanel::from_matrices(ms)
    }

    fn extra(&self) -> usize {
        self.design.as_ref().map_or(1, |x| x.ncols())
    }
}

/// Confidence set for `target` by test inversion.
///
/// The scan starts at the point estimate (or, if that is rejected, at the
/// first accepted point of a grid over household-level means), steps outward
/// with doubling steps until rejection, then bisects each endpoint to
/// `cfg.tol`. A rejected point between two accepted ones aborts with
/// [`Error::NotQuasiConvex`].
pub fn confidence_interval(
    samples: &[HouseholdSample],
    target: Target,
    level: f64,
    cfg: &CiConfig,
) -> Result<ConfidenceSet> {
    let problem = Problem::new(samples, target)?;
    let df = samples[0].mv.dim + problem.extra();
    let critical_value = chi2_quantile(df, level)?;
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut eval = |theta: f64| -> Result<bool> {
        let ts = problem.panel(theta)?.test_statistic(level, &cfg.optimizer)?.ts;
        trace.push((theta, ts));
        Ok(ts <= critical_value)
    };
    let point = problem.point_estimate()?;
    let mut anchor = None;
    if eval(point)? {
        anchor = Some(point);
    } else {
        let lo = problem.means.min();
        let hi = problem.means.max();
        for i in 0..=20 {
            let theta = lo + (hi - lo) * i as f64 / 20.0;
            if eval(theta)? {
                anchor = Some(theta);
                break;
            }
        }
    }
    let Some(anchor) = anchor else {
        trace.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Ok(ConfidenceSet {
            target,
            level,
            lo: f64::NAN,
            hi: f64::NAN,
            empty: true,
            point_estimate: point,
            df,
            critical_value,
            scan_trace: trace,
        });
    };
    let mut ends = [anchor; 2];
    for (side, dir) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut inside = anchor;
        let mut step = cfg.step;
        let mut outside = None;
        for _ in 0..40 {
            let theta = inside + dir * step;
            if eval(theta)? {
                inside = theta;
                step *= 2.0;
            } else {
                outside = Some(theta);
                break;
            }
        }
        if let Some(mut out) = outside {
            while (out - inside).abs() > cfg.tol {
                let mid = 0.5 * (inside + out);
                if eval(mid)? {
                    inside = mid;
                } else {
                    out = mid;
                }
            }
        }
        ends[side] = inside;
    }
    trace.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut seen_accept = false;
    let mut gap: Option<f64> = None;
    for &(theta, ts) in &trace {
        let ok = ts <= critical_value;
        if ok {
            if let (true, Some(g)) = (seen_accept, gap) {
                return Err(Error::NotQuasiConvex(g));
            }
            seen_accept = true;
        } else if seen_accept && gap.is_none() {
            gap = Some(theta);
        }
    }
    Ok(ConfidenceSet {
        target,
        level,
        lo: ends[0],
        hi: ends[1],
        empty: false,
        point_estimate: point,
        df,
        critical_value,
        scan_trace: trace,
    })
}
