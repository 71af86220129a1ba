//! Dense-grid functional principal component analysis.
//!
//! Curves live on a uniform grid with spacing Δt. Integrals are Riemann sums
//! with weight Δt at every grid point, so the L2 inner product is
//! `⟨f, g⟩ = Σⱼ f(tⱼ) g(tⱼ) Δt`. The covariance operator is discretised as
//! `Ĉ Δt`; its eigenvectors rescaled by `1/√Δt` are orthonormal eigenfunctions
//! under that inner product and its eigenvalues are the operator eigenvalues.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sample::{FunctionalSample, MeanCurve};

/// Relative tolerance for the symmetry check and for clamping small
/// negative eigenvalues.
const SPECTRAL_TOL: f64 = 1e-8;

/// The dual (Gram) route is only trusted when the smallest retained
/// eigenvalue is not tiny relative to the largest.
const GRAM_MIN_RATIO: f64 = 1e-6;

/// I×K matrix of principal component scores, one row per curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix(DMatrix<f64>);

impl ScoreMatrix {
    pub fn new(scores: DMatrix<f64>) -> Self {
        ScoreMatrix(scores)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != k) {
            return Err(Error::Shape(format!("score row {i} has {} entries, expected {k}", rows[i].len())));
        }
        Ok(ScoreMatrix(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j])))
    }

    pub fn n_obs(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.0[(i, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn select_rows(&self, rows: &[usize]) -> ScoreMatrix {
        ScoreMatrix(self.0.select_rows(rows))
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &ScoreMatrix) -> Result<ScoreMatrix> {
        if self.n_components() != other.n_components() {
            return Err(Error::Shape(format!(
                "cannot stack {} and {} components",
                self.n_components(),
                other.n_components()
            )));
        }
        let n1 = self.n_obs();
        Ok(ScoreMatrix(DMatrix::from_fn(n1 + other.n_obs(), self.n_components(), |i, k| {
            if i < n1 {
                self.0[(i, k)]
            } else {
                other.0[(i - n1, k)]
            }
        })))
    }

    /// Negates column `k`.
    pub fn flip_component(&mut self, k: usize) {
        self.0.column_mut(k).neg_mut();
    }
}

/// Eigenfunctions (rows, evaluated on the grid) with their eigenvalues in
/// non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenfunctions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Result of a pooled decomposition of two demeaned groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledFpca {
    /// K×T, row k is φₖ on the grid.
    pub eigenfunctions: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub scores_g1: ScoreMatrix,
    pub scores_g2: ScoreMatrix,
    pub means: [MeanCurve; 2],
    pub pve_achieved: f64,
    /// Total variance ∫Ĉ(t,t)dt of the pooled sample.
    pub total_variance: f64,
    pub grid: Grid,
}

impl PooledFpca {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn column_means(values: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..values.ncols())
        .map(|j| rows.iter().map(|&i| values[(i, j)]).sum::<f64>() / n)
        .collect()
}

/// Removes pointwise means, per group when `by_group` is set and the sample
/// carries group labels, otherwise one mean for all curves.
pub fn demean_pointwise(sample: &FunctionalSample, by_group: bool) -> Result<(FunctionalSample, Vec<MeanCurve>)> {
    let n = sample.n_curves();
    let partitions: Vec<(Option<u8>, Vec<usize>)> = match (by_group, sample.groups()) {
        (true, Some(groups)) => [1u8, 2]
            .iter()
            .map(|&z| (Some(z), (0..n).filter(|&i| groups[i] == z).collect()))
            .collect(),
        _ => vec![(None, (0..n).collect())],
    };
    let mut values = sample.values().clone();
    let mut means = Vec::with_capacity(partitions.len());
    for (group, rows) in partitions {
        if rows.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mean = column_means(sample.values(), &rows);
        for &i in &rows {
            for (j, m) in mean.iter().enumerate() {
                values[(i, j)] -= m;
            }
        }
        means.push(MeanCurve { group, values: mean, grid: sample.grid().clone() });
    }
    Ok((sample.with_values(values), means))
}

/// Ĉ(s,t) = (1/I) Σᵢ Yᵢ(s) Yᵢ(t) over all curves, assumed demeaned.
pub fn covariance_surface(sample: &FunctionalSample) -> Result<DMatrix<f64>> {
    let n = sample.n_curves();
    if n < 2 {
        return Err(Error::TooFewCurves { needed: 2, got: n });
    }
    let x = sample.values();
    let c = x.tr_mul(x) / n as f64;
    Ok((&c + c.transpose()) * 0.5)
}

/// Flips row `k` so its largest-magnitude entry is positive (earliest on ties).
fn orient_row(m: &mut DMatrix<f64>, k: usize) {
    let mut best = 0;
    for j in 1..m.ncols() {
        if m[(k, j)].abs() > m[(k, best)].abs() {
            best = j;
        }
    }
    if m[(k, best)] < 0.0 {
        m.row_mut(k).neg_mut();
    }
}

/// Sorted, clamped eigenpairs of a symmetric matrix; columns of the returned
/// matrix are unit eigenvectors.
fn sorted_symmetric_eigen(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let scale = a.norm();
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigensolver produced non-finite eigenvalues".into()));
    }
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tolerance = SPECTRAL_TOL * top.max(f64::EPSILON * scale);
    let mut values = Vec::with_capacity(order.len());
    for &i in &order {
        let v = eig.eigenvalues[i];
        if v < -tolerance {
            return Err(Error::NegativeEigenvalue { value: v, tolerance });
        }
        values.push(v.max(0.0));
    }
    let vectors = eig.eigenvectors.select_columns(&order);
    Ok((values, vectors))
}

/// Eigendecomposition of a covariance surface on `grid`.
///
/// Returns all T eigenpairs. Eigenvalues include the Δt factor so that they
/// sum to `Δt · trace(Ĉ)`; eigenfunctions have unit grid norm and their
/// largest-magnitude entry is positive.
pub fn eigendecompose(cov: &DMatrix<f64>, grid: &Grid) -> Result<Spectrum> {
    let t = grid.len();
    if cov.nrows() != t || cov.ncols() != t {
        return Err(Error::Shape(format!(
            "covariance is {}x{} but the grid has {t} points",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.norm();
    let asymmetry = (cov - cov.transpose()).amax();
    let tolerance = SPECTRAL_TOL * scale;
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric { asymmetry, tolerance });
    }
    let dt = grid.spacing();
    let (eigenvalues, vectors) = sorted_symmetric_eigen((cov + cov.transpose()) * (0.5 * dt))?;
    let mut eigenfunctions = vectors.transpose() / dt.sqrt();
    for k in 0..t {
        orient_row(&mut eigenfunctions, k);
    }
    Ok(Spectrum { eigenfunctions, eigenvalues })
}

/// Smallest K whose leading eigenvalues explain at least `pve` of the total.
pub fn select_k_by_pve(eigenvalues: &[f64], pve: f64) -> Result<usize> {
    if !(pve > 0.0 && pve < 1.0) {
        return Err(Error::InvalidParameter(format!("pve must lie in (0, 1), got {pve}")));
    }
    if let Some(v) = eigenvalues.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidParameter(format!("eigenvalue {v} is not a finite non-negative number")));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("eigenvalues must be non-increasing".into()));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut cumulative = 0.0;
    for (k, v) in eigenvalues.iter().enumerate() {
        cumulative += v;
        if cumulative / total >= pve {
            return Ok(k + 1);
        }
    }
    Ok(eigenvalues.len())
}

/// ζᵢₖ = Σⱼ Yᵢ(tⱼ) φₖ(tⱼ) Δt.
pub fn project_scores(curves: &FunctionalSample, eigenfunctions: &DMatrix<f64>, grid: &Grid) -> Result<ScoreMatrix> {
    if !curves.grid().matches(grid) || eigenfunctions.ncols() != grid.len() {
        return Err(Error::Shape(format!(
            "curves ({} points) and eigenfunctions ({} points) are not on the same grid",
            curves.n_points(),
            eigenfunctions.ncols()
        )));
    }
    Ok(ScoreMatrix(curves.values() * eigenfunctions.transpose() * grid.spacing()))
}

/// Leading K components of demeaned pooled curves, K chosen by `pve`.
///
/// When there are fewer curves than grid points the n×n Gram matrix
/// `X Xᵀ Δt / n` is decomposed instead of the T×T surface; it has the same
/// non-zero spectrum and `φₖ = Xᵀuₖ / √(n λₖ)`.
fn leading_components(pooled: &FunctionalSample, pve: f64) -> Result<(Spectrum, f64)> {
    let grid = pooled.grid();
    let n = pooled.n_curves();
    if n < grid.len() {
        if let Some(found) = gram_components(pooled, pve)? {
            return Ok(found);
        }
    }
    let spectrum = eigendecompose(&covariance_surface(pooled)?, grid)?;
    let total: f64 = spectrum.eigenvalues.iter().sum();
    let k = select_k_by_pve(&spectrum.eigenvalues, pve)?;
    Ok((
        Spectrum {
            eigenfunctions: spectrum.eigenfunctions.rows(0, k).into_owned(),
            eigenvalues: spectrum.eigenvalues[..k].to_vec(),
        },
        total,
    ))
}

fn gram_components(pooled: &FunctionalSample, pve: f64) -> Result<Option<(Spectrum, f64)>> {
    let n = pooled.n_curves();
    if n < 2 {
        return Err(Error::TooFewCurves { needed: 2, got: n });
    }
    let x = pooled.values();
    let dt = pooled.grid().spacing();
    let gram = x * x.transpose() * (dt / n as f64);
    let (eigenvalues, vectors) = sorted_symmetric_eigen((&gram + gram.transpose()) * 0.5)?;
    let k = select_k_by_pve(&eigenvalues, pve)?;
    if eigenvalues[k - 1] < GRAM_MIN_RATIO * eigenvalues[0] {
        return Ok(None);
    }
    let mut eigenfunctions = DMatrix::zeros(k, pooled.n_points());
    for (c, &lambda) in eigenvalues.iter().enumerate().take(k) {
        let phi = x.tr_mul(&vectors.column(c)) / (n as f64 * lambda).sqrt();
        eigenfunctions.row_mut(c).copy_from(&phi.transpose());
        orient_row(&mut eigenfunctions, c);
    }
    let total = eigenvalues.iter().sum();
    Ok(Some((Spectrum { eigenfunctions, eigenvalues: eigenvalues[..k].to_vec() }, total)))
}

/// Group-wise demeaning, pooled decomposition, PVE truncation and per-group
/// score projection.
pub fn pooled_fpca(group1: &FunctionalSample, group2: &FunctionalSample, pve: f64) -> Result<PooledFpca> {
    if !group1.grid().matches(group2.grid()) {
        return Err(Error::Shape("groups are observed on different grids".into()));
    }
    for g in [group1, group2] {
        if g.n_curves() < 2 {
            return Err(Error::TooFewCurves { needed: 2, got: g.n_curves() });
        }
    }
    let (d1, mut m1) = demean_pointwise(group1, false)?;
    let (d2, mut m2) = demean_pointwise(group2, false)?;
    let pooled = d1.stack(&d2)?;
    let (spectrum, total) = leading_components(&pooled, pve)?;
    let grid = group1.grid().clone();
    let scores_g1 = project_scores(&d1, &spectrum.eigenfunctions, &grid)?;
    let scores_g2 = project_scores(&d2, &spectrum.eigenfunctions, &grid)?;
    let explained: f64 = spectrum.eigenvalues.iter().sum();
    let mut mean1 = m1.remove(0);
    let mut mean2 = m2.remove(0);
    mean1.group = Some(1);
    mean2.group = Some(2);
    Ok(PooledFpca {
        eigenfunctions: spectrum.eigenfunctions,
        eigenvalues: spectrum.eigenvalues,
        scores_g1,
        scores_g2,
        means: [mean1, mean2],
        pve_achieved: (explained / total).min(1.0),
        total_variance: total,
        grid,
    })
}
