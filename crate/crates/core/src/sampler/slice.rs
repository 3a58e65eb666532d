use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conditional feasible interval for the scalar step of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockBounds {
    pub lower: f64,
    pub upper: f64,
}

impl BlockBounds {
    pub fn contains_zero(&self) -> bool {
        self.lower <= 0.0 && 0.0 <= self.upper
    }
}

/// Intersection of half-lines `coef * x <= rhs` for a scalar `x`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slice {
    lo: f64,
    hi: f64,
}

impl Slice {
    pub fn new() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// Adds `coef * x <= rhs`. The current point `x = 0` is assumed feasible,
    /// so rounding noise in `rhs` is clipped at zero. Near-zero coefficients
    /// leave the corresponding side unbounded.
    pub fn le(&mut self, coef: f64, rhs: f64) {
        let rhs = rhs.max(0.0);
        if coef.abs() <= 1e-12 {
            return;
        }
        let b = rhs / coef;
        if coef > 0.0 {
            self.hi = self.hi.min(b);
        } else {
            self.lo = self.lo.max(b);
        }
    }

    pub fn bounds(&self) -> BlockBounds {
        BlockBounds {
            lower: self.lo,
            upper: self.hi,
        }
    }

    /// Uniform draw on the slice after trimming `margin` of its width at each end.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64, block: &'static str) -> Result<f64> {
        if !(self.lo <= self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::EmptyInterval(block));
        }
        let w = self.hi - self.lo;
        let lo = self.lo + margin * w;
        let hi = self.hi - margin * w;
        if hi <= lo {
            return Ok(0.5 * (lo + hi));
        }
        Ok(rng.random_range(lo..hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_lines_intersect() {
        let mut s = Slice::new();
        s.le(2.0, 4.0);
        s.le(-1.0, 3.0);
        s.le(0.0, 1.0);
        assert_eq!(s.bounds(), BlockBounds { lower: -3.0, upper: 2.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = s.draw(&mut rng, 1e-8, "t").unwrap();
            assert!((-3.0..=2.0).contains(&x));
        }
    }

    #[test]
    fn unbounded_slice_is_an_error() {
        let mut s = Slice::new();
        s.le(1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(s.draw(&mut rng, 0.0, "t").is_err());
    }
}
