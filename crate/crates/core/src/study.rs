//! Monte Carlo size and power studies over the simulation designs.

use crate::error::Result;
use crate::independent::test_independent;
use crate::paired::test_paired;
use crate::par::map_indices;
use crate::result::{PermutationMode, TestOptions, TestResult};
use crate::seed;
use crate::simgen::{
    gen_independent, gen_paired, gen_supplement, IndependentSimConfig, PairedSimConfig, Scenario, SupplementSimConfig,
    DEFAULT_GRID,
};

/// A data-generating design with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Design {
    Independent { gamma: f64, delta: f64 },
    Paired { rho: f64, delta: f64 },
    Supplement { scenario: Scenario },
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::Independent { .. } => "independent",
            Design::Paired { .. } => "paired",
            Design::Supplement { .. } => "supplement",
        }
    }
}

/// One cell of a simulation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub design: Design,
    pub n: usize,
    pub noise_var: f64,
    pub n_grid: usize,
    pub pve: f64,
    pub permutations: usize,
    pub mode: PermutationMode,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl Cell {
    pub fn new(design: Design, n: usize, replicates: usize, seed: u64) -> Self {
        Cell {
            design,
            n,
            noise_var: 0.25,
            n_grid: DEFAULT_GRID,
            pve: 0.99,
            permutations: 200,
            mode: PermutationMode::Scores,
            alpha: 0.05,
            replicates,
            seed,
        }
    }
}

/// Rejection summary of one test over the replicates of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    /// `"independent"` or `"paired"`.
    pub test: &'static str,
    pub replicates: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mean_k: f64,
    pub results: Vec<TestResult>,
}

impl CellOutcome {
    fn summarise(test: &'static str, results: Vec<TestResult>, alpha: f64) -> Self {
        let replicates = results.len();
        let rejections = results.iter().filter(|r| r.rejects(alpha)).count();
        let mean_k = results.iter().map(|r| r.k as f64).sum::<f64>() / replicates.max(1) as f64;
        CellOutcome {
            test,
            replicates,
            rejections,
            rejection_rate: rejections as f64 / replicates.max(1) as f64,
            mean_k,
            results,
        }
    }
}

/// Runs every replicate of `cell`. Replicate `r` simulates data from stream
/// `(seed, r, 0)` and seeds its permutations from `(seed, r, 1)`. The paired
/// design also runs the independent test on the same data, giving two
/// outcomes (paired first).
pub fn run_cell(cell: &Cell) -> Result<Vec<CellOutcome>> {
    let per_rep = map_indices(cell.replicates, |r| -> Result<Vec<TestResult>> {
        let data_seed = seed::derive(cell.seed, &[r as u64, 0]);
        let opts = TestOptions {
            pve: cell.pve,
            permutations: cell.permutations,
            seed: seed::derive(cell.seed, &[r as u64, 1]),
            mode: cell.mode,
        };
        match cell.design {
            Design::Independent { gamma, delta } => {
                let cfg = IndependentSimConfig {
                    noise_var: cell.noise_var,
                    n_grid: cell.n_grid,
                    ..IndependentSimConfig::new(gamma, delta, cell.n, data_seed)
                };
                let (g1, g2) = gen_independent(&cfg)?;
                Ok(vec![test_independent(&g1, &g2, &opts)?])
            }
            Design::Paired { rho, delta } => {
                let cfg = PairedSimConfig {
                    noise_var: cell.noise_var,
                    n_grid: cell.n_grid,
                    ..PairedSimConfig::new(rho, delta, cell.n, data_seed)
                };
                let (g1, g2) = gen_paired(&cfg)?;
                Ok(vec![test_paired(&g1, &g2, &opts)?, test_independent(&g1, &g2, &opts)?])
            }
            Design::Supplement { scenario } => {
                let cfg = SupplementSimConfig {
                    n_grid: cell.n_grid,
                    ..SupplementSimConfig::new(scenario, cell.noise_var, cell.n, data_seed)
                };
                let (g1, g2) = gen_supplement(&cfg)?;
                Ok(vec![test_independent(&g1, &g2, &opts)?])
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let labels: &[&'static str] = match cell.design {
        Design::Paired { .. } => &["paired", "independent"],
        _ => &["independent"],
    };
    Ok(labels
        .iter()
        .enumerate()
        .map(|(t, label)| {
            let mut results: Vec<TestResult> = per_rep.iter().map(|v| v[t].clone()).collect();
            results.iter_mut().for_each(|r| r.null_statistics = Vec::new());
            CellOutcome::summarise(label, results, cell.alpha)
        })
        .collect())
}
