use serde::{Deserialize, Serialize};

use super::NumericsError;

/// Smallest grid that still fits the five-point stencils.
pub const MIN_POINTS: usize = 5;

/// Uniform periodic 1-D grid on `[x0, x1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    x0: f64,
    x1: f64,
    h: f64,
    coords: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, x0: f64, x1: f64) -> Result<Self, NumericsError> {
        if n < MIN_POINTS {
            return Err(NumericsError::GridTooSmall(n));
        }
        if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
            return Err(NumericsError::InvalidDomain { x0, x1 });
        }
        let h = (x1 - x0) / n as f64;
        let coords = (0..n).map(|i| x0 + i as f64 * h).collect();
        Ok(Self { n, x0, x1, h, coords })
    }

    /// `n` points on the unit interval.
    pub fn unit(n: usize) -> Result<Self, NumericsError> {
        Self::new(n, 0.0, 1.0)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Serializable description of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub x0: f64,
    pub x1: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            x0: 0.0,
            x1: 1.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, NumericsError> {
        Grid::new(self.n, self.x0, self.x1)
    }
}

/// Samples of a scalar quantity on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::new(vec![value; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::new(grid.coords().iter().map(|&x| f(x)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Discrete integral `sum(u_i) * h`.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.values.iter().sum::<f64>() * grid.h()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<(), NumericsError> {
        if self.len() != grid.len() {
            return Err(NumericsError::LengthMismatch {
                field: self.len(),
                grid: grid.len(),
            });
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_are_uniform() {
        let g = Grid::unit(1000).unwrap();
        assert_eq!(g.len(), 1000);
        assert!((g.h() - 1e-3).abs() < 1e-18);
        assert_eq!(g.coords()[0], 0.0);
        assert!((g.coords()[999] - 0.999).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_or_inverted_grids() {
        assert!(matches!(Grid::unit(4), Err(NumericsError::GridTooSmall(4))));
        assert!(Grid::new(10, 1.0, 0.0).is_err());
        assert!(Grid::new(10, 0.0, f64::NAN).is_err());
    }
}
