//! Seedable generators for the simulation designs.
//!
//! All curves follow a zero-mean truncated Karhunen–Loève model
//! `Y(t) = Σₖ ξₖ φₖ(t) + ε(t)` on a uniform grid over [0, 1], with Gaussian
//! scores and iid Gaussian noise at each grid point. Each curve (or pair,
//! or neuron) draws from its own indexed stream, so generation is
//! reproducible and can run in parallel.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::global::TrialDataset;
use crate::grid::Grid;
use crate::par::map_indices;
use crate::sample::FunctionalSample;
use crate::seed::{self, StreamRng};

/// Leading eigenvalues shared by both groups in the sine designs.
pub const SINE_LAMBDAS: [f64; 2] = [16.0, 9.0];
/// Third eigenvalue of group 1 in the paired design.
pub const PAIRED_GAMMA: f64 = 0.5;
/// Eigenvalues of every model in the supplementary two-component designs.
pub const SUPPLEMENT_LAMBDAS: [f64; 2] = [4.0, 1.0];

pub const DEFAULT_GRID: usize = 200;
pub const DEFAULT_NOISE_VAR: f64 = 0.25;

/// `√2 sin(2πkt)`, unit L2 norm on [0, 1].
pub fn basis_sine(k: usize, grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|t| 2f64.sqrt() * (2.0 * PI * k as f64 * t).sin()).collect()
}

/// `√2 cos(2πkt)`, unit L2 norm on [0, 1].
pub fn basis_cosine(k: usize, grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|t| 2f64.sqrt() * (2.0 * PI * k as f64 * t).cos()).collect()
}

/// Orthonormal polynomials of degree 1..=`degree` on the grid, orthogonal to
/// the constant (monomials centred, then Gram–Schmidt under the grid inner
/// product).
pub fn basis_orthopoly(degree: usize, grid: &Grid) -> Result<Vec<Vec<f64>>> {
    if degree == 0 || degree >= grid.len() {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must lie in 1..{}, got {degree}",
            grid.len()
        )));
    }
    let t = grid.points();
    // centring the variable keeps the monomials well conditioned
    let mid = t.iter().sum::<f64>() / t.len() as f64;
    let unit = (grid.spacing() * t.len() as f64).sqrt().recip();
    let mut basis: Vec<Vec<f64>> = vec![vec![unit; t.len()]];
    for d in 1..=degree {
        let mut v: Vec<f64> = t.iter().map(|x| (x - mid).powi(d as i32)).collect();
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = grid.inner_product(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = grid.inner_product(&v, &v).sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::Numerical(format!("polynomial of degree {d} is degenerate on this grid")));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis.remove(0);
    Ok(basis)
}

fn normal(rng: &mut StreamRng) -> f64 {
    rng.sample(StandardNormal)
}

fn assemble(rng: &mut StreamRng, scores: &[f64], basis: &[Vec<f64>], noise_sd: f64, out: &mut [f64]) {
    for (j, y) in out.iter_mut().enumerate() {
        *y = scores.iter().zip(basis).map(|(s, b)| s * b[j]).sum::<f64>();
    }
    for y in out.iter_mut() {
        *y += noise_sd * normal(rng);
    }
}

fn check_variances(variances: &[f64], noise_var: f64) -> Result<()> {
    if let Some(v) = variances.iter().chain([&noise_var]).find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidParameter(format!("variance {v} must be finite and non-negative")));
    }
    Ok(())
}

/// Draws `n` curves with independent scores of the given variances; curve
/// `i` uses the stream `(seed, stream_tag, i)`.
fn independent_group(
    n: usize,
    variances: &[f64],
    basis: &[Vec<f64>],
    noise_var: f64,
    grid: &Grid,
    seed: u64,
    stream_tag: u64,
) -> Result<FunctionalSample> {
    let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let noise_sd = noise_var.sqrt();
    let t = grid.len();
    let rows = map_indices(n, |i| {
        let mut rng = seed::stream(seed, &[stream_tag, i as u64]);
        let scores: Vec<f64> = sds.iter().map(|sd| sd * normal(&mut rng)).collect();
        let mut y = vec![0.0; t];
        assemble(&mut rng, &scores, basis, noise_sd, &mut y);
        y
    });
    FunctionalSample::new(DMatrix::from_fn(n, t, |i, j| rows[i][j]), grid.clone())
}

/// Three sine components with eigenvalues (16, 9, γ) in group 1 and
/// (16, 9, γ + δ) in group 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndependentSimConfig {
    pub gamma: f64,
    pub delta: f64,
    pub n_per_group: usize,
    pub n_grid: usize,
    pub noise_var: f64,
    pub seed: u64,
}

impl IndependentSimConfig {
    pub fn new(gamma: f64, delta: f64, n_per_group: usize, seed: u64) -> Self {
        IndependentSimConfig { gamma, delta, n_per_group, n_grid: DEFAULT_GRID, noise_var: DEFAULT_NOISE_VAR, seed }
    }

    pub fn lambdas(&self) -> [[f64; 3]; 2] {
        let [l1, l2] = SINE_LAMBDAS;
        [[l1, l2, self.gamma], [l1, l2, self.gamma + self.delta]]
    }
}

pub fn gen_independent(cfg: &IndependentSimConfig) -> Result<(FunctionalSample, FunctionalSample)> {
    let lambdas = cfg.lambdas();
    check_variances(&[cfg.gamma, cfg.delta, lambdas[1][2]], cfg.noise_var)?;
    let grid = Grid::uniform(cfg.n_grid)?;
    let basis: Vec<Vec<f64>> = (1..=3).map(|k| basis_sine(k, &grid)).collect();
    let g1 = independent_group(cfg.n_per_group, &lambdas[0], &basis, cfg.noise_var, &grid, cfg.seed, 1)?;
    let g2 = independent_group(cfg.n_per_group, &lambdas[1], &basis, cfg.noise_var, &grid, cfg.seed, 2)?;
    Ok((g1, g2))
}

/// Sine design with scores correlated by ρ within each pair and γ = 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedSimConfig {
    pub rho: f64,
    pub delta: f64,
    pub n_pairs: usize,
    pub n_grid: usize,
    pub noise_var: f64,
    pub seed: u64,
}

impl PairedSimConfig {
    pub fn new(rho: f64, delta: f64, n_pairs: usize, seed: u64) -> Self {
        PairedSimConfig { rho, delta, n_pairs, n_grid: DEFAULT_GRID, noise_var: DEFAULT_NOISE_VAR, seed }
    }

    pub fn lambdas(&self) -> [[f64; 3]; 2] {
        let [l1, l2] = SINE_LAMBDAS;
        [[l1, l2, PAIRED_GAMMA], [l1, l2, PAIRED_GAMMA + self.delta]]
    }
}

/// Paired curves; both samples carry pair ids `"0"`, `"1"`, ….
pub fn gen_paired(cfg: &PairedSimConfig) -> Result<(FunctionalSample, FunctionalSample)> {
    if cfg.rho.is_nan() || cfg.rho.abs() >= 1.0 {
        return Err(Error::InvalidParameter(format!("correlation must lie in (-1, 1), got {}", cfg.rho)));
    }
    let lambdas = cfg.lambdas();
    check_variances(&[cfg.delta, lambdas[1][2]], cfg.noise_var)?;
    let grid = Grid::uniform(cfg.n_grid)?;
    let t = grid.len();
    let basis: Vec<Vec<f64>> = (1..=3).map(|k| basis_sine(k, &grid)).collect();
    let noise_sd = cfg.noise_var.sqrt();
    let tail = (1.0 - cfg.rho * cfg.rho).sqrt();
    let pairs = map_indices(cfg.n_pairs, |i| {
        let mut rng = seed::stream(cfg.seed, &[i as u64]);
        let mut s1 = [0.0; 3];
        let mut s2 = [0.0; 3];
        for k in 0..3 {
            let (z1, z2) = (normal(&mut rng), normal(&mut rng));
            s1[k] = lambdas[0][k].sqrt() * z1;
            s2[k] = lambdas[1][k].sqrt() * (cfg.rho * z1 + tail * z2);
        }
        let mut y1 = vec![0.0; t];
        let mut y2 = vec![0.0; t];
        assemble(&mut rng, &s1, &basis, noise_sd, &mut y1);
        assemble(&mut rng, &s2, &basis, noise_sd, &mut y2);
        (y1, y2)
    });
    let n = cfg.n_pairs;
    let g1 = FunctionalSample::new(DMatrix::from_fn(n, t, |i, j| pairs[i].0[j]), grid.clone())?.with_index_ids()?;
    let g2 = FunctionalSample::new(DMatrix::from_fn(n, t, |i, j| pairs[i].1[j]), grid)?.with_index_ids()?;
    Ok((g1, g2))
}

/// Which model generates the second group in the two-component designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Both groups from the sine model.
    Null,
    /// Sine versus cosine components.
    Orthogonal,
    /// Sine versus orthonormal polynomial components.
    NonOrthogonal,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Null => "null",
            Scenario::Orthogonal => "orthogonal",
            Scenario::NonOrthogonal => "non-orthogonal",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(Scenario::Null),
            "orthogonal" => Ok(Scenario::Orthogonal),
            "non-orthogonal" | "nonorthogonal" => Ok(Scenario::NonOrthogonal),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario '{other}' (expected null, orthogonal or non-orthogonal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplementSimConfig {
    pub scenario: Scenario,
    pub noise_var: f64,
    pub n_per_group: usize,
    pub n_grid: usize,
    pub seed: u64,
}

impl SupplementSimConfig {
    pub fn new(scenario: Scenario, noise_var: f64, n_per_group: usize, seed: u64) -> Self {
        SupplementSimConfig { scenario, noise_var, n_per_group, n_grid: DEFAULT_GRID, seed }
    }
}

pub fn gen_supplement(cfg: &SupplementSimConfig) -> Result<(FunctionalSample, FunctionalSample)> {
    check_variances(&[], cfg.noise_var)?;
    let grid = Grid::uniform(cfg.n_grid)?;
    let sine: Vec<Vec<f64>> = (1..=2).map(|k| basis_sine(k, &grid)).collect();
    let other = match cfg.scenario {
        Scenario::Null => sine.clone(),
        Scenario::Orthogonal => (1..=2).map(|k| basis_cosine(k, &grid)).collect(),
        Scenario::NonOrthogonal => basis_orthopoly(2, &grid)?,
    };
    let n = cfg.n_per_group;
    let g1 = independent_group(n, &SUPPLEMENT_LAMBDAS, &sine, cfg.noise_var, &grid, cfg.seed, 1)?;
    let g2 = independent_group(n, &SUPPLEMENT_LAMBDAS, &other, cfg.noise_var, &grid, cfg.seed, 2)?;
    Ok((g1, g2))
}

/// Repeated trials of the same neurons.
///
/// Neuron `i` carries a latent standard normal vector `aᵢ`; in trial `n` its
/// score on component k is `√λₖ (√ρ aᵢₖ + √(1−ρ) eₙᵢₖ)` with fresh `eₙᵢₖ`, so
/// the trials are exchangeable and scores of one neuron correlate by ρ
/// across trials. The first `inflated_trials` trials add `extra_variance`
/// to the third eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSimConfig {
    pub n_trials: usize,
    pub n_neurons: usize,
    pub n_grid: usize,
    pub lambdas: [f64; 3],
    pub rho: f64,
    pub noise_var: f64,
    pub inflated_trials: usize,
    pub extra_variance: f64,
    pub seed: u64,
}

impl TrialSimConfig {
    pub fn new(n_trials: usize, n_neurons: usize, n_grid: usize, seed: u64) -> Self {
        let [l1, l2] = SINE_LAMBDAS;
        TrialSimConfig {
            n_trials,
            n_neurons,
            n_grid,
            lambdas: [l1, l2, PAIRED_GAMMA],
            rho: 0.5,
            noise_var: DEFAULT_NOISE_VAR,
            inflated_trials: 0,
            extra_variance: 0.0,
            seed,
        }
    }
}

pub fn gen_trials(cfg: &TrialSimConfig) -> Result<TrialDataset> {
    if !(0.0..1.0).contains(&cfg.rho) {
        return Err(Error::InvalidParameter(format!("trial correlation must lie in [0, 1), got {}", cfg.rho)));
    }
    if cfg.inflated_trials > cfg.n_trials {
        return Err(Error::InvalidParameter("more inflated trials than trials".into()));
    }
    check_variances(&[cfg.lambdas[0], cfg.lambdas[1], cfg.lambdas[2], cfg.extra_variance], cfg.noise_var)?;
    let grid = Grid::uniform(cfg.n_grid)?;
    let t = grid.len();
    let basis: Vec<Vec<f64>> = (1..=3).map(|k| basis_sine(k, &grid)).collect();
    let latent: Vec<[f64; 3]> = (0..cfg.n_neurons)
        .map(|i| {
            let mut rng = seed::stream(cfg.seed, &[0, i as u64]);
            [normal(&mut rng), normal(&mut rng), normal(&mut rng)]
        })
        .collect();
    let (shared, own) = (cfg.rho.sqrt(), (1.0 - cfg.rho).sqrt());
    let noise_sd = cfg.noise_var.sqrt();
    let neuron_ids: Vec<String> = (0..cfg.n_neurons).map(|i| i.to_string()).collect();
    let trials = map_indices(cfg.n_trials, |n| {
        let mut lambdas = cfg.lambdas;
        if n < cfg.inflated_trials {
            lambdas[2] += cfg.extra_variance;
        }
        let rows: Vec<Vec<f64>> = (0..cfg.n_neurons)
            .map(|i| {
                let mut rng = seed::stream(cfg.seed, &[1, n as u64, i as u64]);
                let scores: Vec<f64> = (0..3)
                    .map(|k| lambdas[k].sqrt() * (shared * latent[i][k] + own * normal(&mut rng)))
                    .collect();
                let mut y = vec![0.0; t];
                assemble(&mut rng, &scores, &basis, noise_sd, &mut y);
                y
            })
            .collect();
        FunctionalSample::from_rows(&rows, grid.clone())?.with_ids(neuron_ids.clone())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    TrialDataset::new((0..cfg.n_trials).map(|n| n.to_string()).collect(), trials)
}
