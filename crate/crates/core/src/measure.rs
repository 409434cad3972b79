//! Weighted point clouds.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A finite measure `Σ w_i δ_{a_i}` in `R^n`. Atoms are stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub n: usize,
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(n: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("ambient dimension must be at least 1"));
        }
        if atoms.len() != weights.len() * n {
            return Err(Error::input(format!(
                "{} atom coordinates do not match {} weights in dimension {n}",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("atom coordinates must be finite"));
        }
        Ok(DiscreteMeasure { n, atoms, weights })
    }

    pub fn from_points(points: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let n = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::input("no atoms given"))?;
        let mut atoms = Vec::with_capacity(points.len() * n);
        for p in points {
            check_dim(n, p.len())?;
            atoms.extend_from_slice(p);
        }
        DiscreteMeasure::new(n, atoms, weights)
    }

    /// Unit point mass at `x`.
    pub fn dirac(x: &[f64]) -> Result<Self> {
        DiscreteMeasure::new(x.len(), x.to_vec(), vec![1.0])
    }

    pub fn empty(n: usize) -> Self {
        DiscreteMeasure {
            n,
            atoms: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.n..(i + 1) * self.n]
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::pairwise_sum(&self.weights)
    }

    pub fn scaled(&self, lambda: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            n: self.n,
            atoms: self.atoms.iter().map(|v| v * lambda).collect(),
            weights: self.weights.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction() {
        let mu = DiscreteMeasure::from_points(&[vec![0.0, 1.0], vec![2.0, 3.0]], vec![0.25, 0.75])
            .unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atom(1), &[2.0, 3.0]);
        assert_eq!(mu.total_mass(), 1.0);
        assert!(DiscreteMeasure::new(2, vec![0.0; 3], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0], vec![-1.0]).is_err());
        assert!(DiscreteMeasure::from_points(&[vec![0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).is_err());
    }
}
