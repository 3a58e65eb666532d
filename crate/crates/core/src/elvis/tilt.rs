use rayon::prelude::*;

use crate::error::{Error, Result};

/// Draw-by-coordinate moment matrix of one household, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawMatrix {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl DrawMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("moment draws must be nonempty and rectangular".into()));
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// Copy with extra columns appended.
    pub fn append(&self, cols: &[Vec<f64>]) -> Self {
        let extra = cols.len();
        let mut data = Vec::with_capacity(self.rows * (self.dim + extra));
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend(cols.iter().map(|c| c[r]));
        }
        Self {
            rows: self.rows,
            dim: self.dim + extra,
            data,
        }
    }

    /// Copy with every coordinate divided by `scale`.
    pub fn scaled(&self, scale: &[f64]) -> Self {
        let data = self
            .data
            .chunks(self.dim)
            .flat_map(|row| row.iter().zip(scale).map(|(g, s)| g / s))
            .collect();
        Self { data, ..*self }
    }
}

/// Self-normalised weights proportional to `exp(gamma . g_r)`, stabilised
/// by subtracting the largest exponent.
fn weights(m: &DrawMatrix, gamma: &[f64]) -> Result<Vec<f64>> {
    let expo: Vec<f64> = (0..m.rows)
        .map(|r| m.row(r).iter().zip(gamma).map(|(g, c)| g * c).sum())
        .collect();
    let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numeric("tilt exponent is not finite".into()));
    }
    let mut w: Vec<f64> = expo.iter().map(|e| (e - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Tilted average and, when `v` is given, the tilted covariance applied to `v`.
pub(crate) fn tilted(m: &DrawMatrix, gamma: &[f64], v: Option<&[f64]>) -> Result<(Vec<f64>, Vec<f64>)> {
    let w = weights(m, gamma)?;
    let mut mean = vec![0.0; m.dim];
    for (r, wr) in w.iter().enumerate() {
        for (acc, g) in mean.iter_mut().zip(m.row(r)) {
            *acc += wr * g;
        }
    }
    let mut cv = vec![0.0; m.dim];
    if let Some(v) = v {
        for (r, wr) in w.iter().enumerate() {
            let row = m.row(r);
            let proj: f64 = row.iter().zip(&mean).zip(v).map(|((g, mu), x)| (g - mu) * x).sum();
            for ((acc, g), mu) in cv.iter_mut().zip(row).zip(&mean) {
                *acc += wr * (g - mu) * proj;
            }
        }
    }
    Ok((mean, cv))
}

/// Exponentially tilted average `sum_r g_r e^(gamma . g_r) / sum_r e^(gamma . g_r)`.
pub fn averaged_moment(draws: &[Vec<f64>], gamma: &[f64]) -> Result<Vec<f64>> {
    let m = DrawMatrix::from_rows(draws)?;
    if gamma.len() != m.dim {
        return Err(Error::Dimension(format!("gamma has {} entries, moments {}", gamma.len(), m.dim)));
    }
    Ok(tilted(&m, gamma, None)?.0)
}

/// Squared norm of the across-household mean of the averaged moments.
pub fn objective(gamma: &[f64], households: &[Vec<Vec<f64>>]) -> Result<f64> {
    let per: Vec<Vec<f64>> = households
        .par_iter()
        .map(|d| averaged_moment(d, gamma))
        .collect::<Result<_>>()?;
    let j = per.len() as f64;
    let dim = gamma.len();
    Ok((0..dim)
        .map(|k| (per.iter().map(|g| g[k]).sum::<f64>() / j).powi(2))
        .sum())
}

/// Jacobian of the averaged moment: the tilted covariance matrix.
pub fn averaged_moment_jacobian(draws: &[Vec<f64>], gamma: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = DrawMatrix::from_rows(draws)?;
    (0..m.dim)
        .map(|k| {
            let mut e = vec![0.0; m.dim];
            e[k] = 1.0;
            Ok(tilted(&m, gamma, Some(&e))?.1)
        })
        .collect()
}
