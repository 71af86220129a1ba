//! Independent two-sample test of equal score covariance matrices.
//!
//! The statistic is the largest squared difference between corresponding
//! entries of the two score covariance matrices, each standardised by an
//! estimate of its variance. Under equal covariance operators,
//! `M − 4 log K + log log K` has a Gumbel-type limit; small samples are
//! handled by a group-label permutation null.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::fpca::{pooled_fpca, ScoreMatrix};
use crate::par::map_indices;
use crate::result::{permutation_p_value, MaxStatistic, PermutationMode, PermutationOutcome, TestOptions, TestResult};
use crate::sample::FunctionalSample;
use crate::seed;

/// Entries with numerator and denominator below this are treated as 0/0.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Sample covariance of scores with the per-entry variance estimates used to
/// standardise differences. All use the 1/I divisor.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCovariance {
    pub omega: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub mean: Vec<f64>,
    pub n: usize,
}

/// Row-major copy of a score matrix; row `i` is `data[i*k..(i+1)*k]`.
#[derive(Debug, Clone)]
pub(crate) struct Rows {
    pub data: Vec<f64>,
    pub n: usize,
    pub k: usize,
}

impl Rows {
    pub fn new(scores: &DMatrix<f64>) -> Self {
        let (n, k) = scores.shape();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            data.extend(scores.row(i).iter());
        }
        Rows { data, n, k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// Rows `index[0], index[1], …` with their column means removed, and the means.
    pub fn centred(&self, index: &[usize]) -> (Rows, Vec<f64>) {
        let k = self.k;
        let mut mean = vec![0.0; k];
        for &i in index {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = index.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut data = Vec::with_capacity(index.len() * k);
        for &i in index {
            data.extend(self.row(i).iter().zip(&mean).map(|(v, m)| v - m));
        }
        (Rows { data, n: index.len(), k }, mean)
    }
}

/// Ω and θ of already centred rows. Each entry is accumulated over rows in
/// order; the inner loops run across entries so they vectorise.
pub(crate) fn covariance_of_centred(c: &Rows, mean: Vec<f64>) -> ScoreCovariance {
    let (n, k) = (c.n(), c.k);
    let nf = n as f64;
    let mut omega = DMatrix::zeros(k, k);
    let mut theta = DMatrix::zeros(k, k);
    let mut acc = vec![0.0; k];
    let mut w = vec![0.0; k];
    for p in 0..k {
        let width = k - p;
        acc[..width].iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let row = &c.row(i)[p..];
            let a = row[0];
            for (s, b) in acc[..width].iter_mut().zip(row) {
                *s += a * b;
            }
        }
        for j in 0..width {
            w[j] = acc[j] / nf;
        }
        acc[..width].iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let row = &c.row(i)[p..];
            let a = row[0];
            for ((s, b), wj) in acc[..width].iter_mut().zip(row).zip(&w[..width]) {
                let d = a * b - wj;
                *s += d * d;
            }
        }
        for j in 0..width {
            let (t, q) = (acc[j] / nf, p + j);
            omega[(p, q)] = w[j];
            omega[(q, p)] = w[j];
            theta[(p, q)] = t;
            theta[(q, p)] = t;
        }
    }
    ScoreCovariance { omega, theta, mean, n }
}

pub(crate) fn covariance_of_rows(rows: &Rows, index: &[usize]) -> Result<ScoreCovariance> {
    if index.len() < 2 {
        return Err(Error::TooFewCurves { needed: 2, got: index.len() });
    }
    let (c, mean) = rows.centred(index);
    Ok(covariance_of_centred(&c, mean))
}

pub fn score_covariance(scores: &ScoreMatrix) -> Result<ScoreCovariance> {
    let rows = Rows::new(scores.as_matrix());
    let all: Vec<usize> = (0..rows.n()).collect();
    covariance_of_rows(&rows, &all)
}

/// Standardised squared difference with the degenerate-entry rules.
pub(crate) fn standardised(numerator: f64, denominator: f64) -> f64 {
    if denominator < DEGENERATE_EPS {
        if numerator < DEGENERATE_EPS {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        numerator / denominator
    }
}

/// Maximum over `p ≤ q` of `entry(p, q)`, first maximiser kept on ties.
pub(crate) fn max_upper<F: Fn(usize, usize) -> f64>(k: usize, entry: F) -> MaxStatistic {
    let mut best = MaxStatistic { value: f64::NEG_INFINITY, argmax: (0, 0) };
    for p in 0..k {
        for q in p..k {
            let v = entry(p, q);
            if v > best.value {
                best = MaxStatistic { value: v, argmax: (p, q) };
            }
        }
    }
    best
}

pub fn statistic_independent(c1: &ScoreCovariance, c2: &ScoreCovariance) -> Result<MaxStatistic> {
    let k = c1.omega.nrows();
    if k != c2.omega.nrows() {
        return Err(Error::Shape(format!("groups have {} and {} components", k, c2.omega.nrows())));
    }
    if k == 0 {
        return Err(Error::Shape("no components".into()));
    }
    let (n1, n2) = (c1.n as f64, c2.n as f64);
    Ok(max_upper(k, |p, q| {
        let d = c1.omega[(p, q)] - c2.omega[(p, q)];
        standardised(d * d, c1.theta[(p, q)] / n1 + c2.theta[(p, q)] / n2)
    }))
}

/// Gumbel-limit p-value of the max statistic with K components.
pub fn asymptotic_pvalue(m: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "the asymptotic p-value needs K >= 2 (got K = {k}); use the permutation p-value"
        )));
    }
    let kf = k as f64;
    let x = m - 4.0 * kf.ln() + kf.ln().ln();
    let rate = (8.0 * std::f64::consts::PI).sqrt().recip() * (-x / 2.0).exp();
    Ok((-(-rate).exp_m1()).clamp(0.0, 1.0))
}

fn split_statistic(pooled: &Rows, order: &[usize], n1: usize) -> Result<f64> {
    let c1 = covariance_of_rows(pooled, &order[..n1])?;
    let c2 = covariance_of_rows(pooled, &order[n1..])?;
    Ok(statistic_independent(&c1, &c2)?.value)
}

/// Group-label permutation null on the fixed pooled scores. Replicate `r`
/// draws its relabelling from the stream `(seed, r)`.
pub fn permutation_pvalue_independent(
    scores1: &ScoreMatrix,
    scores2: &ScoreMatrix,
    permutations: usize,
    seed: u64,
) -> Result<PermutationOutcome> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let observed = statistic_independent(&score_covariance(scores1)?, &score_covariance(scores2)?)?;
    let pooled = Rows::new(scores1.stack(scores2)?.as_matrix());
    let (n1, n) = (scores1.n_obs(), pooled.n());
    let null = map_indices(permutations, |r| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(seed, &[r as u64]));
        split_statistic(&pooled, &order, n1)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(PermutationOutcome { observed, p_value: permutation_p_value(observed.value, &null), null })
}

/// Permutation null that relabels curves and refits the pooled FPCA for
/// every replicate.
pub fn full_pipeline_null_independent(
    group1: &FunctionalSample,
    group2: &FunctionalSample,
    pve: f64,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let pooled = group1.stack(group2)?;
    let (n1, n) = (group1.n_curves(), pooled.n_curves());
    map_indices(permutations, |r| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(seed, &[r as u64]));
        let fit = pooled_fpca(&pooled.select(&order[..n1])?, &pooled.select(&order[n1..])?, pve)?;
        let c1 = score_covariance(&fit.scores_g1)?;
        let c2 = score_covariance(&fit.scores_g2)?;
        Ok(statistic_independent(&c1, &c2)?.value)
    })
    .into_iter()
    .collect()
}

/// Pooled FPCA followed by the max statistic, its asymptotic p-value when
/// K ≥ 2 and a permutation p-value when permutations are requested.
pub fn test_independent(group1: &FunctionalSample, group2: &FunctionalSample, opts: &TestOptions) -> Result<TestResult> {
    let fit = pooled_fpca(group1, group2, opts.pve)?;
    let c1 = score_covariance(&fit.scores_g1)?;
    let c2 = score_covariance(&fit.scores_g2)?;
    let observed = statistic_independent(&c1, &c2)?;
    let k = fit.k();
    let p_asymptotic = if k >= 2 { Some(asymptotic_pvalue(observed.value, k)?) } else { None };
    let null = match (opts.permutations, opts.mode) {
        (0, _) => Vec::new(),
        (p, PermutationMode::Scores) => {
            permutation_pvalue_independent(&fit.scores_g1, &fit.scores_g2, p, opts.seed)?.null
        }
        (p, PermutationMode::FullPipeline) => {
            full_pipeline_null_independent(group1, group2, opts.pve, p, opts.seed)?
        }
    };
    let p_permutation = (!null.is_empty()).then(|| permutation_p_value(observed.value, &null));
    if p_asymptotic.is_none() && p_permutation.is_none() {
        return Err(Error::InvalidParameter(
            "K = 1 leaves no asymptotic p-value; request permutations".into(),
        ));
    }
    Ok(TestResult {
        statistic: observed.value,
        p_asymptotic,
        p_permutation,
        k,
        pve_achieved: fit.pve_achieved,
        argmax: observed.argmax,
        n1: group1.n_curves(),
        n2: group2.n_curves(),
        permutations: opts.permutations,
        seed: opts.seed,
        paired: false,
        null_statistics: null,
    })
}
