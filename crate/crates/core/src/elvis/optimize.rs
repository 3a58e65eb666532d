use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::tilt::{tilted, DrawMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Ridge added to the moment covariance, relative to its average diagonal.
    pub ridge: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            ridge: 1e-8,
        }
    }
}

/// Minimiser of the averaged-moment norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSolution {
    /// Tilt in the moments' own units.
    pub gamma: Vec<f64>,
    /// Squared norm of the across-household mean of averaged moments at `gamma`.
    pub objective_value: f64,
    /// Gradient norm with every moment coordinate scaled to unit pooled spread.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub ts: f64,
    pub df: usize,
    pub level: f64,
    pub critical_value: f64,
    pub passes: bool,
    pub solution: GammaSolution,
}

/// Upper `level` quantile of the chi-square distribution.
pub fn chi2_quantile(df: usize, level: f64) -> Result<f64> {
    if df == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::Numeric(format!("chi-square quantile needs df > 0 and level in (0,1), got {df}, {level}")));
    }
    let d = ChiSquared::new(df as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(d.inverse_cdf(level))
}

pub(crate) struct Bfgs {
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton minimisation with Armijo backtracking.
pub(crate) fn bfgs<V, G>(value: V, value_grad: G, x0: Vec<f64>, max_iter: usize, tol: f64) -> Result<Bfgs>
where
    V: Fn(&[f64]) -> Result<f64>,
    G: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = value_grad(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first = true;
    for it in 0..max_iter {
        let gn = dot(&g, &g).sqrt();
        if gn <= tol {
            return Ok(Bfgs { x, grad_norm: gn, iterations: it, converged: true });
        }
        let gv = DVector::from_column_slice(&g);
        let mut d: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        if dot(&d, &g) >= 0.0 {
            h = DMatrix::identity(n, n);
            d = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&d, &g);
        let mut step = 1.0;
        let mut next = None;
        while step > 1e-20 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fc = value(&cand)?;
            if fc <= f + 1e-4 * step * slope {
                next = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(xn) = next else {
            return Ok(Bfgs { x, grad_norm: gn, iterations: it, converged: false });
        };
        let (fn_, gn_) = value_grad(&xn)?;
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, gn_.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first = false;
            }
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - &s * y.transpose() * rho;
            let b = &i - &y * s.transpose() * rho;
            h = &a * &h * &b + &s * s.transpose() * rho;
        }
        x = xn;
        f = fn_;
        g = gn_;
    }
    let gn = dot(&g, &g).sqrt();
    Ok(Bfgs { x, grad_norm: gn, iterations: max_iter, converged: gn <= tol })
}

/// Per-household moment draws, held with every coordinate divided by its
/// pooled standard deviation across all draws of all households.
#[derive(Debug, Clone)]
pub struct MomentPanel {
    std: Vec<DrawMatrix>,
    pub scale: Vec<f64>,
}

impl MomentPanel {
    pub fn new(households: &[Vec<Vec<f64>>]) -> Result<Self> {
        let ms = households.iter().map(|h| DrawMatrix::from_rows(h)).collect::<Result<Vec<_>>>()?;
        Self::from_matrices(ms)
    }

    pub fn from_matrices(ms: Vec<DrawMatrix>) -> Result<Self> {
        let dim = ms.first().map(|m| m.dim).ok_or_else(|| Error::Dimension("no households".into()))?;
        if ms.iter().any(|m| m.dim != dim) {
            return Err(Error::Dimension("households disagree on moment dimension".into()));
        }
        let count: usize = ms.iter().map(|m| m.rows).sum();
        let mut mean = vec![0.0; dim];
        for m in &ms {
            for r in 0..m.rows {
                for (acc, g) in mean.iter_mut().zip(m.row(r)) {
                    *acc += g / count as f64;
                }
            }
        }
        let mut var = vec![0.0; dim];
        for m in &ms {
            for r in 0..m.rows {
                for ((acc, g), mu) in var.iter_mut().zip(m.row(r)).zip(&mean) {
                    *acc += (g - mu).powi(2) / count as f64;
                }
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .zip(&mean)
            .map(|(v, mu)| {
                let s = v.sqrt().max(mu.abs());
                if s.is_finite() && s > 1e-300 { s } else { 1.0 }
            })
            .collect();
        let std = ms.iter().map(|m| m.scaled(&scale)).collect();
        Ok(Self { std, scale })
    }

    pub fn households(&self) -> usize {
        self.std.len()
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    fn per_household(&self, gamma: &[f64], v: Option<&[f64]>) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.std.par_iter().map(|m| tilted(m, gamma, v)).collect()
    }

    fn mean(&self, per: &[(Vec<f64>, Vec<f64>)], pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>) -> Vec<f64> {
        let j = per.len() as f64;
        (0..self.dim()).map(|k| per.iter().map(|p| pick(p)[k]).sum::<f64>() / j).collect()
    }

    fn weighted_value(&self, gamma: &[f64], w: &DMatrix<f64>) -> Result<f64> {
        let per = self.per_household(gamma, None)?;
        let g = DVector::from_vec(self.mean(&per, |p| &p.0));
        Ok(g.dot(&(w * &g)))
    }

    fn weighted_value_grad(&self, gamma: &[f64], w: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
        let g = DVector::from_vec(self.mean(&self.per_household(gamma, None)?, |p| &p.0));
        let wg = w * &g;
        let per = self.per_household(gamma, Some(wg.as_slice()))?;
        let cv = self.mean(&per, |p| &p.1);
        Ok((g.dot(&wg), cv.iter().map(|v| 2.0 * v).collect()))
    }

    fn minimize(&self, w: &DMatrix<f64>, x0: Vec<f64>, cfg: &OptimizerConfig) -> Result<Bfgs> {
        bfgs(
            |x| self.weighted_value(x, w),
            |x| self.weighted_value_grad(x, w),
            x0,
            cfg.max_iter,
            cfg.grad_tol,
        )
    }

    fn raw_gamma(&self, gamma_std: &[f64]) -> Vec<f64> {
        gamma_std.iter().zip(&self.scale).map(|(g, s)| g / s).collect()
    }

    /// Across-household mean of averaged moments in the moments' own units.
    pub fn mean_moment(&self, gamma_raw: &[f64]) -> Result<Vec<f64>> {
        let gs: Vec<f64> = gamma_raw.iter().zip(&self.scale).map(|(g, s)| g * s).collect();
        let per = self.per_household(&gs, None)?;
        Ok(self.mean(&per, |p| &p.0).iter().zip(&self.scale).map(|(g, s)| g * s).collect())
    }

    /// Minimises the averaged-moment norm over the tilt, starting from zero.
    pub fn minimize_gamma(&self, cfg: &OptimizerConfig) -> Result<GammaSolution> {
        let id = DMatrix::identity(self.dim(), self.dim());
        let res = self.minimize(&id, vec![0.0; self.dim()], cfg)?;
        self.solution(&res)
    }

    fn solution(&self, res: &Bfgs) -> Result<GammaSolution> {
        let gamma = self.raw_gamma(&res.x);
        let objective_value = self.mean_moment(&gamma)?.iter().map(|v| v * v).sum();
        Ok(GammaSolution {
            gamma,
            objective_value,
            gradient_norm: res.grad_norm,
            iterations: res.iterations,
            converged: res.converged,
        })
    }

    /// Mean and ridge-regularised inverse sample covariance of per-household
    /// averaged moments at a standardised tilt.
    fn studentize(&self, gamma: &[f64], ridge: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let per = self.per_household(gamma, None)?;
        let j = per.len();
        if j < 2 {
            return Err(Error::SingularCovariance);
        }
        let d = self.dim();
        let mean = DVector::from_vec(self.mean(&per, |p| &p.0));
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for (g, _) in &per {
            let e = DVector::from_column_slice(g) - &mean;
            cov += &e * e.transpose();
        }
        cov /= (j - 1) as f64;
        let reg = ridge * cov.trace() / d as f64;
        let reg = if reg > 0.0 { reg } else { ridge };
        for k in 0..d {
            cov[(k, k)] += reg;
        }
        let inv = cov.cholesky().ok_or(Error::SingularCovariance)?.inverse();
        Ok((mean, inv))
    }

    /// `J g' S^-1 g` at a tilt given in the moments' own units.
    pub fn statistic_at(&self, gamma_raw: &[f64], ridge: f64) -> Result<f64> {
        let gs: Vec<f64> = gamma_raw.iter().zip(&self.scale).map(|(g, s)| g * s).collect();
        let (m, inv) = self.studentize(&gs, ridge)?;
        Ok(self.households() as f64 * m.dot(&(&inv * &m)))
    }

    /// Studentised statistic: the tilt minimising the plain norm, followed by
    /// a second minimisation with the covariance at that tilt as weight; the
    /// smaller of the two studentised values is reported.
    pub fn test_statistic(&self, level: f64, cfg: &OptimizerConfig) -> Result<TestResult> {
        let df = self.dim();
        let critical_value = chi2_quantile(df, level)?;
        let id = DMatrix::identity(df, df);
        let first = self.minimize(&id, vec![0.0; df], cfg)?;
        let (m1, w) = self.studentize(&first.x, cfg.ridge)?;
        let j = self.households() as f64;
        let ts1 = j * m1.dot(&(&w * &m1));
        let second = self.minimize(&w, first.x.clone(), cfg)?;
        let (m2, w2) = self.studentize(&second.x, cfg.ridge)?;
        let ts2 = j * m2.dot(&(&w2 * &m2));
        let (ts, best) = if ts2 < ts1 { (ts2, &second) } else { (ts1, &first) };
        Ok(TestResult {
            ts,
            df,
            level,
            critical_value,
            passes: ts <= critical_value,
            solution: self.solution(best)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::super::tilt::{averaged_moment, averaged_moment_jacobian, objective};
    use super::*;

    fn random_households(seed: u64, j: usize, n: usize, d: usize, shift: f64) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..j)
            .map(|_| {
                (0..n)
                    .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0) + shift).collect())
                    .collect()
            })
            .collect()
    }

    /// Upper-tail chi-square quantile by bisection on the regularised lower
    /// incomplete gamma function, evaluated by its power series.
    fn chi2_quantile_oracle(df: f64, level: f64) -> f64 {
        fn ln_gamma(x: f64) -> f64 {
            let c = [
                76.18009172947146,
                -86.50532032941677,
                24.01409824083091,
                -1.231739572450155,
                0.1208650973866179e-2,
                -0.5395239384953e-5,
            ];
            let tmp = x + 5.5 - (x + 0.5) * (x + 5.5).ln();
            let mut ser = 1.000000000190015;
            for (k, ck) in c.iter().enumerate() {
                ser += ck / (x + 1.0 + k as f64);
            }
            -tmp + (2.5066282746310005 * ser / x).ln()
        }
        let p = |a: f64, x: f64| {
            let (mut sum, mut term, mut ap) = (1.0 / a, 1.0 / a, a);
            for _ in 0..10_000 {
                ap += 1.0;
                term *= x / ap;
                sum += term;
                if term.abs() < sum.abs() * 1e-17 {
                    break;
                }
            }
            sum * (-x + a * x.ln() - ln_gamma(a)).exp()
        };
        let (mut lo, mut hi) = (0.0, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(df / 2.0, mid / 2.0) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn chi2_quantiles_match_oracle() {
        for (df, want) in [(12usize, 21.0261), (1, 3.8415)] {
            let got = chi2_quantile(df, 0.95).unwrap();
            assert!((got - chi2_quantile_oracle(df as f64, 0.95)).abs() < 1e-6);
            assert!((got - want).abs() < 1e-4);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let hh = random_households(1, 4, 50, 3, 0.2);
        let mp = MomentPanel::new(&hh).unwrap();
        let id = DMatrix::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = mp.weighted_value_grad(&x, &id).unwrap();
            for k in 0..3 {
                let h = 1e-5;
                let mut up = x.clone();
                let mut dn = x.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (mp.weighted_value(&up, &id).unwrap() - mp.weighted_value(&dn, &id).unwrap()) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1e-3), "{fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn jacobian_is_tilted_covariance() {
        let hh = random_households(3, 1, 30, 2, 0.0);
        let gamma = [0.4, -0.7];
        let jac = averaged_moment_jacobian(&hh[0], &gamma).unwrap();
        for k in 0..2 {
            let h = 1e-6;
            let mut up = gamma;
            let mut dn = gamma;
            up[k] += h;
            dn[k] -= h;
            let a = averaged_moment(&hh[0], &up).unwrap();
            let b = averaged_moment(&hh[0], &dn).unwrap();
            for i in 0..2 {
                let fd = (a[i] - b[i]) / (2.0 * h);
                assert!((fd - jac[i][k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn objective_at_zero_is_plain_mean_norm() {
        let hh = random_households(4, 5, 20, 3, 0.1);
        let mut mean = [0.0; 3];
        for h in &hh {
            for k in 0..3 {
                mean[k] += h.iter().map(|r| r[k]).sum::<f64>() / 20.0 / 5.0;
            }
        }
        let want: f64 = mean.iter().map(|m| m * m).sum();
        assert!((objective(&[0.0; 3], &hh).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn zero_moments_give_zero_gamma() {
        let hh = vec![vec![vec![0.0, 0.0]; 4]; 3];
        let sol = MomentPanel::new(&hh).unwrap().minimize_gamma(&OptimizerConfig::default()).unwrap();
        assert_eq!(sol.gamma, vec![0.0, 0.0]);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn feasible_shift_is_tilted_away() {
        let hh = random_households(5, 10, 100, 2, 0.3);
        let sol = MomentPanel::new(&hh).unwrap().minimize_gamma(&OptimizerConfig::default()).unwrap();
        assert!(sol.objective_value < 1e-10, "{sol:?}");
    }

    #[test]
    fn household_order_does_not_matter() {
        let hh = random_households(6, 6, 40, 2, 0.5);
        let mut rev = hh.clone();
        rev.reverse();
        let cfg = OptimizerConfig::default();
        let a = MomentPanel::new(&hh).unwrap().minimize_gamma(&cfg).unwrap();
        let b = MomentPanel::new(&rev).unwrap().minimize_gamma(&cfg).unwrap();
        for (x, y) in a.gamma.iter().zip(&b.gamma) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_draws_leave_objective_unchanged() {
        let hh = random_households(7, 3, 10, 2, 0.1);
        let doubled: Vec<Vec<Vec<f64>>> = hh.iter().map(|h| h.iter().chain(h).cloned().collect()).collect();
        let g = [0.3, -0.2];
        assert!((objective(&g, &hh).unwrap() - objective(&g, &doubled).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn statistic_is_invariant_to_currency_units() {
        let hh = random_households(8, 30, 50, 3, 0.05);
        let scaled: Vec<Vec<Vec<f64>>> = hh
            .iter()
            .map(|h| h.iter().map(|r| vec![r[0], r[1], 100.0 * r[2]]).collect())
            .collect();
        let cfg = OptimizerConfig::default();
        let a = MomentPanel::new(&hh).unwrap().test_statistic(0.95, &cfg).unwrap();
        let b = MomentPanel::new(&scaled).unwrap().test_statistic(0.95, &cfg).unwrap();
        assert!((a.ts - b.ts).abs() <= 1e-8 * a.ts.max(1.0), "{} vs {}", a.ts, b.ts);
    }

    #[test]
    fn infeasible_shift_is_rejected() {
        // Every draw has a positive first coordinate.
        let hh: Vec<Vec<Vec<f64>>> = random_households(9, 40, 30, 2, 0.0)
            .into_iter()
            .map(|h| h.into_iter().map(|r| vec![r[0].abs() + 0.5, r[1]]).collect())
            .collect();
        let res = MomentPanel::new(&hh).unwrap().test_statistic(0.95, &OptimizerConfig::default()).unwrap();
        assert!(res.solution.objective_value > 0.1);
        assert!(!res.passes);
    }
}
