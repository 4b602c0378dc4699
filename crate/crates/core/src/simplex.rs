use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of the coordinate sum from one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A point of the probability simplex `{x >= 0, sum x = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::NotOnSimplex("no coordinates".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::NotOnSimplex(format!("coordinate {bad} is negative or not finite")));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotOnSimplex(format!("coordinates sum to {sum}")));
        }
        Ok(SimplexPoint(coords))
    }

    /// Scales non-negative weights onto the simplex.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NotOnSimplex("weights must be non-negative with a positive sum".into()));
        }
        Ok(SimplexPoint(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// The barycentre `(1/r, ..., 1/r)`.
    pub fn uniform(r: usize) -> Self {
        SimplexPoint(vec![1.0 / r as f64; r])
    }

    pub fn vertex(r: usize, i: usize) -> Self {
        let mut c = vec![0.0; r];
        c[i] = 1.0;
        SimplexPoint(c)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] > 0.0).collect()
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        SimplexPoint(coords)
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(SimplexPoint::new(vec![0.25, 0.75]).is_ok());
        assert!(SimplexPoint::new(vec![0.1, 0.2, 0.7]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        assert!(SimplexPoint::normalized(vec![0.0, 0.0]).is_err());
        let p = SimplexPoint::normalized(vec![1.0, 3.0]).unwrap();
        assert_eq!(p.coords(), &[0.25, 0.75]);
        assert_eq!(SimplexPoint::vertex(3, 1).support(), vec![1]);
    }
}
