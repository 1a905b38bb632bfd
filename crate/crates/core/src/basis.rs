//! Polynomial design rows on a shared time grid.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Precomputed design rows `(1, u_j, u_j^2, ..., u_j^p)` where `u_j` is the
/// grid affinely mapped to `[0, 1]`. The normalization keeps Vandermonde
/// systems well conditioned for long grids and high degrees; fitted
/// coefficients live in the normalized coordinate and predictions are made
/// through [`PolyBasis::row`], so callers never see the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis<F> {
    degree: usize,
    grid: Vec<F>,
    rows: Vec<Vec<F>>,
}

impl<F: Scalar> PolyBasis<F> {
    pub fn new(grid: &[F], degree: usize) -> Result<Self> {
        let m = grid.len();
        if m < 2 {
            return Err(Error::InvalidData("basis needs at least 2 points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidData(
                "grid must be strictly increasing".into(),
            ));
        }
        let lo = grid[0];
        let span = grid[m - 1] - lo;
        let rows = grid
            .iter()
            .map(|&x| {
                let u = (x - lo) / span;
                let mut row = Vec::with_capacity(degree + 1);
                let mut pow = F::one();
                for _ in 0..=degree {
                    row.push(pow);
                    pow = pow * u;
                }
                row
            })
            .collect();
        Ok(Self {
            degree,
            grid: grid.to_vec(),
            rows,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of coefficients per segment.
    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn m(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[F] {
        &self.grid
    }

    /// Design row of time index `j` (0-based).
    pub fn row(&self, j: usize) -> &[F] {
        &self.rows[j]
    }

    /// Prediction `beta^T x_j`.
    pub fn predict(&self, beta: &[F], j: usize) -> F {
        self.rows[j]
            .iter()
            .zip(beta)
            .map(|(&x, &b)| x * b)
            .sum()
    }

    /// Minimum window length that keeps degree-`p` normal matrices full rank
    /// on distinct grid points.
    pub fn min_segment_len(&self) -> usize {
        self.degree + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rows_are_powers_of_the_normalized_grid() {
        let grid = vec![2.0, 4.0, 6.0];
        let basis = PolyBasis::new(&grid, 2).unwrap();
        assert_eq!(basis.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(basis.row(1), &[1.0, 0.5, 0.25]);
        assert_eq!(basis.row(2), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn predict_is_the_dot_product() {
        let grid = vec![0.0, 1.0, 2.0];
        let basis = PolyBasis::new(&grid, 1).unwrap();
        assert_abs_diff_eq!(basis.predict(&[1.0, 2.0], 2), 3.0);
    }

    #[test]
    fn decreasing_grid_is_rejected() {
        assert!(PolyBasis::new(&[1.0, 1.0], 0).is_err());
    }
}
