use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Curves observed on a shared grid, one row per curve.
///
/// Optional labels: a group indicator per row and a pairing id per row
/// (the pair id for paired samples, the neuron id for trial data).
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    values: DMatrix<f64>,
    grid: Grid,
    groups: Option<Vec<u8>>,
    ids: Option<Vec<String>>,
}

impl FunctionalSample {
    pub fn new(values: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::EmptyGroup);
        }
        if values.ncols() != grid.len() {
            return Err(Error::Shape(format!(
                "curves have {} points but the grid has {}",
                values.ncols(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidParameter(format!(
                "non-finite value {} at curve {i}, point {j}",
                values[(i, j)]
            )));
        }
        Ok(FunctionalSample { values, grid, groups: None, ids: None })
    }

    /// Builds a sample from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], grid: Grid) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let t = grid.len();
        if let Some(i) = rows.iter().position(|r| r.len() != t) {
            return Err(Error::Shape(format!(
                "curve {i} has {} points, expected {t}",
                rows[i].len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), t, |i, j| rows[i][j]);
        Self::new(values, grid)
    }

    pub fn with_groups(mut self, groups: Vec<u8>) -> Result<Self> {
        if groups.len() != self.n_curves() {
            return Err(Error::Labels(format!(
                "{} group labels for {} curves",
                groups.len(),
                self.n_curves()
            )));
        }
        if let Some(z) = groups.iter().find(|z| !matches!(z, 1 | 2)) {
            return Err(Error::Labels(format!("group label {z} is not 1 or 2")));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    /// Attaches pairing ids; each id must be unique within the sample.
    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_curves() {
            return Err(Error::Labels(format!("{} ids for {} curves", ids.len(), self.n_curves())));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Labels(format!("duplicate pair id '{id}'")));
            }
        }
        self.ids = Some(ids);
        Ok(self)
    }

    /// Ids `0..n` as strings.
    pub fn with_index_ids(self) -> Result<Self> {
        let n = self.n_curves();
        self.with_ids((0..n).map(|i| i.to_string()).collect())
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn groups(&self) -> Option<&[u8]> {
        self.groups.as_deref()
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Rows selected by index, labels carried along.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let values = self.values.select_rows(rows);
        Ok(FunctionalSample {
            values,
            grid: self.grid.clone(),
            groups: self.groups.as_ref().map(|g| rows.iter().map(|&i| g[i]).collect()),
            ids: self.ids.as_ref().map(|g| rows.iter().map(|&i| g[i].clone()).collect()),
        })
    }

    /// Concatenates rows of two samples on the same grid. Labels are kept
    /// only when both samples carry them.
    pub fn stack(&self, other: &FunctionalSample) -> Result<Self> {
        if !self.grid.matches(&other.grid) {
            return Err(Error::Shape("samples are observed on different grids".into()));
        }
        let (n1, n2, t) = (self.n_curves(), other.n_curves(), self.n_points());
        let values = DMatrix::from_fn(n1 + n2, t, |i, j| {
            if i < n1 {
                self.values[(i, j)]
            } else {
                other.values[(i - n1, j)]
            }
        });
        let groups = match (&self.groups, &other.groups) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(FunctionalSample { values, grid: self.grid.clone(), groups, ids: None })
    }

    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Self {
        FunctionalSample {
            values,
            grid: self.grid.clone(),
            groups: self.groups.clone(),
            ids: self.ids.clone(),
        }
    }

    /// Multiplies every curve by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        self.with_values(&self.values * c)
    }
}

/// Pointwise mean of a group of curves.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub group: Option<u8>,
    pub values: Vec<f64>,
    pub grid: Grid,
}
