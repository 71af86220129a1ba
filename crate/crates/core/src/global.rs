//! Global test across many trials of the same neurons.
//!
//! Every pair of trials is compared with the paired test (neurons are the
//! pairing units). The resulting p-values are summarised by their
//! Cramér–von Mises distance from Uniform(0, 1), and that summary is
//! calibrated by permuting trial labels independently within each neuron.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::paired::{align_pairs, test_paired};
use crate::par::map_indices;
use crate::result::{permutation_p_value, PermutationMode, TestOptions};
use crate::sample::FunctionalSample;
use crate::seed;

/// N trials, each holding the same I neurons in the same row order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    trial_ids: Vec<String>,
    trials: Vec<FunctionalSample>,
}

impl TrialDataset {
    /// Checks that every trial carries the neuron ids of the first trial and
    /// reorders rows so neuron `i` is row `i` in every trial.
    pub fn new(trial_ids: Vec<String>, trials: Vec<FunctionalSample>) -> Result<Self> {
        if trials.is_empty() {
            return Err(Error::EmptyGroup);
        }
        if trial_ids.len() != trials.len() {
            return Err(Error::Labels(format!("{} trial ids for {} trials", trial_ids.len(), trials.len())));
        }
        let first = &trials[0];
        if first.ids().is_none() {
            return Err(Error::Labels("trials need neuron ids".into()));
        }
        if first.n_curves() < 2 {
            return Err(Error::TooFewCurves { needed: 2, got: first.n_curves() });
        }
        let mut aligned = Vec::with_capacity(trials.len());
        for (id, trial) in trial_ids.iter().zip(&trials) {
            if !trial.grid().matches(first.grid()) {
                return Err(Error::Shape(format!("trial '{id}' is observed on a different grid")));
            }
            let ordered = align_pairs(first, trial).map_err(|e| match e {
                Error::Labels(msg) => Error::Labels(format!("trial '{id}': {}", msg.replace("pair id", "neuron"))),
                other => other,
            })?;
            aligned.push(ordered);
        }
        Ok(TrialDataset { trial_ids, trials: aligned })
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn n_neurons(&self) -> usize {
        self.trials[0].n_curves()
    }

    pub fn n_points(&self) -> usize {
        self.trials[0].n_points()
    }

    pub fn trial_ids(&self) -> &[String] {
        &self.trial_ids
    }

    pub fn neuron_ids(&self) -> &[String] {
        self.trials[0].ids().expect("validated on construction")
    }

    pub fn trial(&self, n: usize) -> &FunctionalSample {
        &self.trials[n]
    }

    pub fn trials(&self) -> &[FunctionalSample] {
        &self.trials
    }

    /// Unordered trial pairs `(a, b)`, `a < b`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_trials();
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
    }
}

/// Source of the pairwise p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairwisePvalue {
    #[default]
    Permutation,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalOptions {
    pub pve: f64,
    pub per_pair_permutations: usize,
    pub global_permutations: usize,
    pub pairwise: PairwisePvalue,
    pub mode: PermutationMode,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions {
            pve: 0.99,
            per_pair_permutations: 200,
            global_permutations: 200,
            pairwise: PairwisePvalue::Permutation,
            mode: PermutationMode::Scores,
        }
    }
}

/// Seed of the paired test for pair number `index`.
pub fn pair_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[index as u64])
}

/// Paired-test p-values for all trial pairs, ordered as [`TrialDataset::pairs`].
pub fn pairwise_pvalues(ds: &TrialDataset, opts: &GlobalOptions, seed: u64) -> Result<Vec<f64>> {
    let pairs = ds.pairs();
    if opts.pairwise == PairwisePvalue::Permutation && opts.per_pair_permutations == 0 {
        return Err(Error::InvalidParameter("permutation p-values need at least one permutation per pair".into()));
    }
    let permutations = match opts.pairwise {
        PairwisePvalue::Permutation => opts.per_pair_permutations,
        PairwisePvalue::Asymptotic => 0,
    };
    map_indices(pairs.len(), |j| {
        let (a, b) = pairs[j];
        let test_opts = TestOptions { pve: opts.pve, permutations, seed: pair_seed(seed, j), mode: opts.mode };
        let result = test_paired(ds.trial(a), ds.trial(b), &test_opts)?;
        match opts.pairwise {
            PairwisePvalue::Permutation => Ok(result.p_permutation.expect("permutations requested")),
            PairwisePvalue::Asymptotic => result.p_asymptotic.ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "trials {} and {} retain a single component; asymptotic p-value undefined",
                    ds.trial_ids[a], ds.trial_ids[b]
                ))
            }),
        }
    })
    .into_iter()
    .collect()
}

fn check_unit_interval(pvalues: &[f64]) -> Result<()> {
    if pvalues.is_empty() {
        return Err(Error::InvalidParameter("need at least one p-value".into()));
    }
    if let Some(p) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("p-value {p} outside [0, 1]")));
    }
    Ok(())
}

/// Sample Cramér–von Mises statistic against Uniform(0, 1):
/// `1/(12m) + Σᵢ (u₍ᵢ₎ − (2i−1)/(2m))²`.
pub fn cvm_statistic(pvalues: &[f64]) -> Result<f64> {
    check_unit_interval(pvalues)?;
    let mut u = pvalues.to_vec();
    u.sort_by(f64::total_cmp);
    let m = u.len() as f64;
    let spread: f64 = u
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let d = x - (2 * i + 1) as f64 / (2.0 * m);
            d * d
        })
        .sum();
    Ok(1.0 / (12.0 * m) + spread)
}

/// `∫₀¹ (F_m(x) − x)² dx` for the empirical CDF `F_m`; equals the sample
/// statistic divided by `m`.
pub fn cvm_integral(pvalues: &[f64]) -> Result<f64> {
    Ok(cvm_statistic(pvalues)? / pvalues.len() as f64)
}

/// Reassigns each neuron's curves to trials by an independent uniform
/// permutation; neuron `i` uses the stream `(seed, i)`.
pub fn permute_trials_within_neuron(ds: &TrialDataset, seed: u64) -> TrialDataset {
    let n = ds.n_trials();
    let assignment: Vec<Vec<usize>> = (0..ds.n_neurons())
        .map(|i| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed::stream(seed, &[i as u64]));
            order
        })
        .collect();
    let trials = (0..n)
        .map(|t| {
            let mut values = ds.trial(t).values().clone();
            for (i, order) in assignment.iter().enumerate() {
                values.set_row(i, &ds.trial(order[t]).values().row(i));
            }
            ds.trial(t).with_values(values)
        })
        .collect();
    TrialDataset { trial_ids: ds.trial_ids.clone(), trials }
}

/// Outcome of the global test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalResult {
    pub pairwise_pvalues: Vec<f64>,
    pub eta_observed: f64,
    /// The observed statistic divided by the number of comparisons.
    pub eta_integral: f64,
    pub eta_null: Vec<f64>,
    pub p_global: f64,
    pub comparisons: usize,
    pub n_trials: usize,
    pub n_neurons: usize,
    pub pve: f64,
    pub per_pair_permutations: usize,
    pub global_permutations: usize,
    pub pairwise: PairwisePvalue,
    pub seed: u64,
}

impl GlobalResult {
    /// Counts of pairwise p-values in `bins` equal-width bins on [0, 1].
    pub fn pvalue_histogram(&self, bins: usize) -> Vec<usize> {
        let mut counts = vec![0; bins];
        for p in &self.pairwise_pvalues {
            counts[((p * bins as f64) as usize).min(bins - 1)] += 1;
        }
        counts
    }

    /// Linear-interpolation quantile of the permutation null.
    pub fn null_quantile(&self, q: f64) -> f64 {
        quantile(&self.eta_null, q)
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_global <= alpha
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Observed CvM statistic of the pairwise p-values and its trial-label
/// permutation null. Permuted dataset `p` is drawn from stream `(seed, 1, p)`
/// and its pairwise tests are seeded from `(seed, 2, p)`.
pub fn global_test(ds: &TrialDataset, opts: &GlobalOptions, seed: u64) -> Result<GlobalResult> {
    if ds.n_trials() < 2 {
        return Err(Error::InvalidParameter("the global test needs at least two trials".into()));
    }
    if opts.global_permutations == 0 {
        return Err(Error::InvalidParameter("need at least one global permutation".into()));
    }
    let observed = pairwise_pvalues(ds, opts, seed::derive(seed, &[0]))?;
    let eta = cvm_statistic(&observed)?;
    let eta_null = map_indices(opts.global_permutations, |p| {
        let permuted = permute_trials_within_neuron(ds, seed::derive(seed, &[1, p as u64]));
        cvm_statistic(&pairwise_pvalues(&permuted, opts, seed::derive(seed, &[2, p as u64]))?)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let m = observed.len();
    Ok(GlobalResult {
        eta_integral: eta / m as f64,
        p_global: permutation_p_value(eta, &eta_null),
        pairwise_pvalues: observed,
        eta_observed: eta,
        eta_null,
        comparisons: m,
        n_trials: ds.n_trials(),
        n_neurons: ds.n_neurons(),
        pve: opts.pve,
        per_pair_permutations: opts.per_pair_permutations,
        global_permutations: opts.global_permutations,
        pairwise: opts.pairwise,
        seed,
    })
}
