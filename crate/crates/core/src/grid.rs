//! Cell-centred scalar fields on axis-aligned boxes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Uniform box grid with cubic cells of side `h`; the first cell centre sits
/// at `lo + h/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
}

impl BoxGrid {
    pub fn new(lo: Vec<f64>, h: f64, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != shape.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::InvalidSpec("grid dimension mismatch".into()));
        }
        if !(h > 0.0) || shape.contains(&0) {
            return Err(Error::InvalidSpec("grid needs h > 0 and non-empty axes".into()));
        }
        Ok(BoxGrid { lo, h, shape })
    }

    /// Square (cubic) grid of `m` cells per axis covering `[c - half, c + half]^N`.
    pub fn centered(center: &[f64], half: f64, m: usize) -> Result<Self> {
        let h = 2.0 * half / m as f64;
        Self::new(center.iter().map(|c| c - half).collect(), h, vec![m; center.len()])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.shape).map(|(l, &s)| l + self.h * s as f64).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    /// Multi-index of flat cell `k` (last axis fastest).
    pub fn index(&self, mut k: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        for a in 0..self.dim() {
            k = k * self.shape[a] + idx[a];
        }
        k
    }

    pub fn center(&self, k: usize) -> Vec<f64> {
        let idx = self.index(k);
        (0..self.dim()).map(|a| self.lo[a] + self.h * (idx[a] as f64 + 0.5)).collect()
    }

    /// Cell centres, row-major.
    pub fn centers(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.dim());
        for k in 0..self.len() {
            out.extend(self.center(k));
        }
        out
    }
}

/// Piecewise-constant field: `values[k]` is the mean over cell `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: BoxGrid,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: BoxGrid) -> Self {
        let n = grid.len();
        GridField { grid, values: vec![0.0; n] }
    }

    /// Samples `f` at the cell centres.
    pub fn sample<F: FnMut(&[f64]) -> f64>(grid: BoxGrid, mut f: F) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.center(k))).collect();
        GridField { grid, values }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫ f·φ` with midpoint quadrature.
    pub fn integrate_against<F: FnMut(&[f64]) -> f64>(&self, mut phi: F) -> f64 {
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            if *v != 0.0 {
                acc += v * phi(&self.grid.center(k));
            }
        }
        acc * self.grid.cell_volume()
    }

    /// Cell masses `values·h^N`.
    pub fn masses(&self) -> Vec<f64> {
        let vol = self.grid.cell_volume();
        self.values.iter().map(|v| v * vol).collect()
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(Error::InvalidSpec("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridField { grid: self.grid.clone(), values })
    }

    pub fn scaled(&self, c: f64) -> GridField {
        GridField { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = BoxGrid::new(vec![-1.0, 0.0, 2.0], 0.5, vec![3, 4, 5]).unwrap();
        for k in 0..g.len() {
            let idx = g.index(k);
            assert_eq!(g.flat(&idx[..3]), k);
        }
        assert_eq!(g.center(0), vec![-0.75, 0.25, 2.25]);
        assert_eq!(g.hi(), vec![0.5, 2.0, 4.5]);
    }

    #[test]
    fn midpoint_integral_of_gaussian() {
        let g = BoxGrid::centered(&[0.0, 0.0], 4.0, 80).unwrap();
        let f = GridField::sample(g, |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI));
        assert!((f.integral() - 1.0).abs() < 1e-3);
        let m2 = f.integrate_against(|x| x[0] * x[0]);
        assert!((m2 - 1.0).abs() < 2e-3);
    }
}
