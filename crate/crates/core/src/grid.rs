use crate::error::{Error, Result};

const UNIFORM_RTOL: f64 = 1e-12;

/// A uniform observation grid on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    spacing: f64,
}

impl Grid {
    /// `len` equally spaced points spanning [0, 1], endpoints included.
    pub fn uniform(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {len}")));
        }
        let step = 1.0 / (len - 1) as f64;
        let points = (0..len).map(|j| j as f64 * step).collect();
        Ok(Grid { points, spacing: step })
    }

    /// Validates user-supplied timepoints.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        let len = points.len();
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {len}")));
        }
        if let Some(bad) = points.iter().find(|t| !t.is_finite() || **t < 0.0 || **t > 1.0) {
            return Err(Error::InvalidGrid(format!("timepoint {bad} outside [0, 1]")));
        }
        if let Some(j) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "timepoints must be strictly increasing (index {})",
                j + 1
            )));
        }
        let spacing = (points[len - 1] - points[0]) / (len - 1) as f64;
        for (j, w) in points.windows(2).enumerate() {
            let d = w[1] - w[0];
            if (d - spacing).abs() > UNIFORM_RTOL * spacing.max(f64::MIN_POSITIVE) {
                return Err(Error::NonUniformGrid(format!(
                    "step {d} at index {} differs from mean spacing {spacing}",
                    j + 1
                )));
            }
        }
        Ok(Grid { points, spacing })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Quadrature weight Δt shared by every grid point.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Σⱼ f(tⱼ) g(tⱼ) Δt.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        debug_assert_eq!(g.len(), self.len());
        f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() * self.spacing
    }

    /// Grids agree pointwise up to the uniformity tolerance.
    pub fn matches(&self, other: &Grid) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= UNIFORM_RTOL * self.spacing.max(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_spans_unit_interval() {
        let g = Grid::uniform(200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g.points()[0], 0.0);
        assert!((g.points()[199] - 1.0).abs() < 1e-15);
        assert!((g.spacing() - 1.0 / 199.0).abs() < 1e-18);
    }

    #[test]
    fn rejects_short_and_non_uniform() {
        assert!(matches!(Grid::uniform(1), Err(Error::InvalidGrid(_))));
        assert!(matches!(
            Grid::from_points(vec![0.0, 0.1, 0.3]),
            Err(Error::NonUniformGrid(_))
        ));
        assert!(matches!(
            Grid::from_points(vec![0.0, 0.5, 0.5]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::from_points(vec![0.0, 0.5, 1.5]).is_err());
        assert!(Grid::from_points(vec![0.1, 0.2, 0.3, 0.4]).is_ok());
    }
}
