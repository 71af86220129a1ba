//! Two-sample tests for equality of covariance operators of functional data.
//!
//! Curves from two groups are demeaned per group, pooled, and decomposed by
//! functional principal component analysis. The groups' score covariance
//! matrices are then compared entry by entry with a maximum standardised
//! difference statistic. Independent and paired versions are provided, along
//! with a global test over all pairs of many trials and the simulation
//! designs used to study size and power.

pub mod error;
pub mod fpca;
pub mod global;
pub mod grid;
pub mod independent;
pub mod paired;
pub mod par;
pub mod result;
pub mod sample;
pub mod seed;
pub mod simgen;
pub mod study;

pub use error::{Error, Result};
pub use fpca::{
    covariance_surface, demean_pointwise, eigendecompose, pooled_fpca, project_scores, select_k_by_pve, PooledFpca,
    ScoreMatrix, Spectrum,
};
pub use global::{
    cvm_integral, cvm_statistic, global_test, pairwise_pvalues, permute_trials_within_neuron, GlobalOptions,
    GlobalResult, PairwisePvalue, TrialDataset,
};
pub use grid::Grid;
pub use independent::{
    asymptotic_pvalue, permutation_pvalue_independent, score_covariance, statistic_independent, test_independent,
    ScoreCovariance,
};
pub use paired::{
    permutation_pvalue_paired, phi_hat, statistic_paired, statistic_paired_with_phi, test_paired, PairedScores,
    PhiMatrix,
};
pub use result::{MaxStatistic, PermutationMode, PermutationOutcome, TestOptions, TestResult};
pub use sample::{FunctionalSample, MeanCurve};
