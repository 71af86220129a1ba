//! Paired-sample variant of the max statistic.
//!
//! Row `i` of the first score matrix is paired with row `i` of the second.
//! The standardisation subtracts twice the cross-covariance of the centred
//! score products, and the permutation null swaps the two members of each
//! pair with probability one half.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fpca::{pooled_fpca, ScoreMatrix};
use crate::independent::{
    asymptotic_pvalue, covariance_of_centred, max_upper, standardised, Rows, ScoreCovariance,
};
use crate::par::map_indices;
use crate::result::{permutation_p_value, MaxStatistic, PermutationMode, PermutationOutcome, TestOptions, TestResult};
use crate::sample::FunctionalSample;
use crate::seed;

/// Score matrices of paired curves, aligned row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    first: ScoreMatrix,
    second: ScoreMatrix,
}

impl PairedScores {
    pub fn new(first: ScoreMatrix, second: ScoreMatrix) -> Result<Self> {
        if first.as_matrix().shape() != second.as_matrix().shape() {
            return Err(Error::Shape(format!(
                "paired scores have shapes {:?} and {:?}",
                first.as_matrix().shape(),
                second.as_matrix().shape()
            )));
        }
        if first.n_obs() < 2 {
            return Err(Error::TooFewCurves { needed: 2, got: first.n_obs() });
        }
        Ok(PairedScores { first, second })
    }

    pub fn first(&self) -> &ScoreMatrix {
        &self.first
    }

    pub fn second(&self) -> &ScoreMatrix {
        &self.second
    }

    pub fn n_pairs(&self) -> usize {
        self.first.n_obs()
    }

    /// Exchanges the members of every pair `i` with `swap[i]` set.
    pub fn swapped(&self, swap: &[bool]) -> PairedScores {
        let (a, b) = (self.first.as_matrix(), self.second.as_matrix());
        let pick = |from_first: bool| {
            DMatrix::from_fn(a.nrows(), a.ncols(), |i, k| {
                if swap[i] != from_first {
                    a[(i, k)]
                } else {
                    b[(i, k)]
                }
            })
        };
        PairedScores { first: ScoreMatrix::new(pick(true)), second: ScoreMatrix::new(pick(false)) }
    }
}

/// φ̂: covariance between the centred score products of the two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiMatrix(pub DMatrix<f64>);

impl PhiMatrix {
    pub fn zeros(k: usize) -> Self {
        PhiMatrix(DMatrix::zeros(k, k))
    }
}

/// Σᵢ aᵢₚ aᵢ_q bᵢₚ bᵢ_q / I − Ω̂¹ₚ_q Ω̂²ₚ_q on centred rows.
fn phi_from(a: &Rows, b: &Rows, c1: &ScoreCovariance, c2: &ScoreCovariance) -> PhiMatrix {
    let (n, k) = (a.n(), a.k);
    let mut phi = DMatrix::zeros(k, k);
    let mut acc = vec![0.0; k];
    for p in 0..k {
        let width = k - p;
        acc[..width].iter_mut().for_each(|s| *s = 0.0);
        for i in 0..n {
            let (ra, rb) = (&a.row(i)[p..], &b.row(i)[p..]);
            let (ap, bp) = (ra[0], rb[0]);
            for ((s, aq), bq) in acc[..width].iter_mut().zip(ra).zip(rb) {
                *s += ap * aq * bp * bq;
            }
        }
        for (j, s) in acc.iter().enumerate().take(width) {
            let q = p + j;
            let v = s / n as f64 - c1.omega[(p, q)] * c2.omega[(p, q)];
            phi[(p, q)] = v;
            phi[(q, p)] = v;
        }
    }
    PhiMatrix(phi)
}

/// Both groups stacked row-major: row `i` of the first group is row `i`,
/// its partner is row `n + i`.
fn stacked(ps: &PairedScores) -> Result<Rows> {
    Ok(Rows::new(ps.first.stack(&ps.second)?.as_matrix()))
}

/// Paired statistic of the pairs drawn as rows `index1[i]` and `index2[i]`.
fn paired_from_rows(rows: &Rows, index1: &[usize], index2: &[usize]) -> Result<(MaxStatistic, PhiMatrix)> {
    if index1.len() < 2 {
        return Err(Error::TooFewCurves { needed: 2, got: index1.len() });
    }
    let (a, ma) = rows.centred(index1);
    let (b, mb) = rows.centred(index2);
    let c1 = covariance_of_centred(&a, ma);
    let c2 = covariance_of_centred(&b, mb);
    let phi = phi_from(&a, &b, &c1, &c2);
    Ok((statistic_paired_with_phi(&c1, &c2, &phi)?, phi))
}

fn identity_indices(n: usize) -> (Vec<usize>, Vec<usize>) {
    ((0..n).collect(), (n..2 * n).collect())
}

pub fn phi_hat(ps: &PairedScores) -> Result<PhiMatrix> {
    let (i1, i2) = identity_indices(ps.n_pairs());
    Ok(paired_from_rows(&stacked(ps)?, &i1, &i2)?.1)
}

/// Paired statistic from its parts; the denominator is
/// `(θ̂¹ + θ̂² − 2φ̂) / I`, clamped at zero.
pub fn statistic_paired_with_phi(c1: &ScoreCovariance, c2: &ScoreCovariance, phi: &PhiMatrix) -> Result<MaxStatistic> {
    let k = c1.omega.nrows();
    if k != c2.omega.nrows() || k != phi.0.nrows() || c1.n != c2.n {
        return Err(Error::Shape("paired statistic parts disagree in size".into()));
    }
    if k == 0 {
        return Err(Error::Shape("no components".into()));
    }
    let n = c1.n as f64;
    Ok(max_upper(k, |p, q| {
        let d = c1.omega[(p, q)] - c2.omega[(p, q)];
        let den = ((c1.theta[(p, q)] + c2.theta[(p, q)] - 2.0 * phi.0[(p, q)]) / n).max(0.0);
        standardised(d * d, den)
    }))
}

pub fn statistic_paired(ps: &PairedScores) -> Result<MaxStatistic> {
    let (i1, i2) = identity_indices(ps.n_pairs());
    Ok(paired_from_rows(&stacked(ps)?, &i1, &i2)?.0)
}

fn coin_flips(seed: u64, replicate: usize, n: usize) -> Vec<bool> {
    let mut rng = seed::stream(seed, &[replicate as u64]);
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// Within-pair swap null. Replicate `r` flips one fair coin per pair from
/// the stream `(seed, r)`.
pub fn permutation_pvalue_paired(ps: &PairedScores, permutations: usize, seed: u64) -> Result<PermutationOutcome> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let rows = stacked(ps)?;
    let n = ps.n_pairs();
    let (i1, i2) = identity_indices(n);
    let observed = paired_from_rows(&rows, &i1, &i2)?.0;
    let null = map_indices(permutations, |r| {
        let flips = coin_flips(seed, r, n);
        let index1: Vec<usize> = (0..n).map(|i| if flips[i] { n + i } else { i }).collect();
        let index2: Vec<usize> = (0..n).map(|i| if flips[i] { i } else { n + i }).collect();
        Ok(paired_from_rows(&rows, &index1, &index2)?.0.value)
    })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(PermutationOutcome { observed, p_value: permutation_p_value(observed.value, &null), null })
}

fn swap_curves(g1: &FunctionalSample, g2: &FunctionalSample, swap: &[bool]) -> (FunctionalSample, FunctionalSample) {
    let (a, b) = (g1.values(), g2.values());
    let pick = |from_first: bool| {
        DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| if swap[i] != from_first { a[(i, j)] } else { b[(i, j)] })
    };
    (g1.with_values(pick(true)), g2.with_values(pick(false)))
}

/// Within-pair swap null that refits the pooled FPCA per replicate.
pub fn full_pipeline_null_paired(
    group1: &FunctionalSample,
    group2: &FunctionalSample,
    pve: f64,
    permutations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = group1.n_curves();
    map_indices(permutations, |r| {
        let (s1, s2) = swap_curves(group1, group2, &coin_flips(seed, r, n));
        let fit = pooled_fpca(&s1, &s2, pve)?;
        Ok(statistic_paired(&PairedScores::new(fit.scores_g1, fit.scores_g2)?)?.value)
    })
    .into_iter()
    .collect()
}

/// Reorders `group2` so its row `i` carries the pair id of row `i` of `group1`.
pub fn align_pairs(group1: &FunctionalSample, group2: &FunctionalSample) -> Result<FunctionalSample> {
    let (ids1, ids2) = match (group1.ids(), group2.ids()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Labels("paired mode requires pair_id".into())),
    };
    if ids1.len() != ids2.len() {
        return Err(Error::Labels(format!(
            "groups have {} and {} curves; pairs must match one to one",
            ids1.len(),
            ids2.len()
        )));
    }
    let position: HashMap<&str, usize> = ids2.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let order = ids1
        .iter()
        .map(|id| {
            position
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Labels(format!("pair id '{id}' has no partner in group 2")))
        })
        .collect::<Result<Vec<usize>>>()?;
    group2.select(&order)
}

/// Pooled FPCA ignoring the pairing, then the paired statistic and its
/// within-pair permutation p-value.
pub fn test_paired(group1: &FunctionalSample, group2: &FunctionalSample, opts: &TestOptions) -> Result<TestResult> {
    let group2 = align_pairs(group1, group2)?;
    let fit = pooled_fpca(group1, &group2, opts.pve)?;
    let k = fit.k();
    let paired = PairedScores::new(fit.scores_g1, fit.scores_g2)?;
    let observed = statistic_paired(&paired)?;
    let p_asymptotic = if k >= 2 { Some(asymptotic_pvalue(observed.value, k)?) } else { None };
    let null = match (opts.permutations, opts.mode) {
        (0, _) => Vec::new(),
        (p, PermutationMode::Scores) => permutation_pvalue_paired(&paired, p, opts.seed)?.null,
        (p, PermutationMode::FullPipeline) => full_pipeline_null_paired(group1, &group2, opts.pve, p, opts.seed)?,
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
        paired: true,
        null_statistics: null,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::independent::score_covariance;

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn phi_equals_theta_for_identical_members() {
        let s = scores(&[&[1.0, 2.0], &[-0.5, 0.3], &[2.0, -1.0], &[0.1, 0.7]]);
        let ps = PairedScores::new(s.clone(), s.clone()).unwrap();
        let phi = phi_hat(&ps).unwrap();
        let c = score_covariance(&s).unwrap();
        for p in 0..2 {
            for q in 0..2 {
                assert!((phi.0[(p, q)] - c.theta[(p, q)]).abs() < 1e-14);
            }
        }
        assert_eq!(statistic_paired(&ps).unwrap().value, 0.0);
    }

    #[test]
    fn phi_vanishes_when_second_member_constant() {
        let ps = PairedScores::new(scores(&[&[1.0], &[-1.0]]), scores(&[&[1.0], &[1.0]])).unwrap();
        assert_eq!(phi_hat(&ps).unwrap().0[(0, 0)], 0.0);
    }

    #[test]
    fn shape_checks() {
        assert!(PairedScores::new(scores(&[&[1.0], &[2.0]]), scores(&[&[1.0], &[2.0], &[3.0]])).is_err());
        assert!(PairedScores::new(scores(&[&[1.0]]), scores(&[&[1.0]])).is_err());
    }

    #[test]
    fn identical_members_have_unit_p_value() {
        let s = scores(&[&[1.0, 2.0], &[-0.5, 0.3], &[2.0, -1.0], &[0.1, 0.7]]);
        let ps = PairedScores::new(s.clone(), s).unwrap();
        let out = permutation_pvalue_paired(&ps, 100, 4).unwrap();
        assert!(out.null.iter().all(|m| *m == 0.0));
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn alignment_reorders_by_pair_id() {
        let g = crate::grid::Grid::uniform(3).unwrap();
        let a = FunctionalSample::from_rows(&[vec![1.0; 3], vec![2.0; 3]], g.clone())
            .unwrap()
            .with_ids(vec!["x".into(), "y".into()])
            .unwrap();
        let b = FunctionalSample::from_rows(&[vec![20.0; 3], vec![10.0; 3]], g.clone())
            .unwrap()
            .with_ids(vec!["y".into(), "x".into()])
            .unwrap();
        let aligned = align_pairs(&a, &b).unwrap();
        assert_eq!(aligned.curve(0), vec![10.0; 3]);
        let c = b.clone().with_ids(vec!["y".into(), "z".into()]).unwrap();
        assert!(align_pairs(&a, &c).unwrap_err().to_string().contains("'x'"));
        let bare = FunctionalSample::from_rows(&[vec![1.0; 3], vec![2.0; 3]], g).unwrap();
        assert!(align_pairs(&a, &bare).unwrap_err().to_string().contains("paired mode requires pair_id"));
    }
}
