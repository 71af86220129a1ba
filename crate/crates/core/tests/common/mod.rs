//! Loop-level reference implementations shared by the integration tests.
//! They use plain nested `Vec`s and follow the textbook formulas directly.

#![allow(dead_code)]

use funcov::ScoreMatrix;

pub type Table = Vec<Vec<f64>>;

pub fn rows(s: &ScoreMatrix) -> Table {
    (0..s.n_obs()).map(|i| (0..s.n_components()).map(|k| s.get(i, k)).collect()).collect()
}

pub fn centred(x: &Table) -> Table {
    let n = x.len();
    let k = x[0].len();
    let mut mean = vec![0.0; k];
    for p in 0..k {
        let mut s = 0.0;
        for row in x {
            s += row[p];
        }
        mean[p] = s / n as f64;
    }
    x.iter().map(|row| (0..k).map(|p| row[p] - mean[p]).collect()).collect()
}

/// Ω and θ with the 1/I divisor, filled entry by entry.
pub fn omega_theta(x: &Table) -> (Table, Table) {
    let c = centred(x);
    let n = x.len() as f64;
    let k = x[0].len();
    let mut omega = vec![vec![0.0; k]; k];
    let mut theta = vec![vec![0.0; k]; k];
    for p in 0..k {
        for q in 0..k {
            let mut s = 0.0;
            for row in &c {
                s += row[p] * row[q];
            }
            omega[p][q] = s / n;
            let mut v = 0.0;
            for row in &c {
                let d = row[p] * row[q] - omega[p][q];
                v += d * d;
            }
            theta[p][q] = v / n;
        }
    }
    (omega, theta)
}

fn entry(num: f64, den: f64) -> f64 {
    if den < 1e-12 {
        if num < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn scan(k: usize, f: impl Fn(usize, usize) -> f64) -> (f64, (usize, usize)) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for p in 0..k {
        for q in p..k {
            let v = f(p, q);
            if v > best.0 {
                best = (v, (p, q));
            }
        }
    }
    best
}

pub fn brute_independent(a: &ScoreMatrix, b: &ScoreMatrix) -> (f64, (usize, usize)) {
    let (xa, xb) = (rows(a), rows(b));
    let (oa, ta) = omega_theta(&xa);
    let (ob, tb) = omega_theta(&xb);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    scan(oa.len(), |p, q| {
        let d = oa[p][q] - ob[p][q];
        entry(d * d, ta[p][q] / na + tb[p][q] / nb)
    })
}

pub fn brute_paired(a: &ScoreMatrix, b: &ScoreMatrix) -> (f64, (usize, usize)) {
    let (xa, xb) = (rows(a), rows(b));
    let (oa, ta) = omega_theta(&xa);
    let (ob, tb) = omega_theta(&xb);
    let (ca, cb) = (centred(&xa), centred(&xb));
    let n = xa.len() as f64;
    scan(oa.len(), |p, q| {
        let mut s = 0.0;
        for i in 0..xa.len() {
            s += ca[i][p] * ca[i][q] * cb[i][p] * cb[i][q];
        }
        let phi = s / n - oa[p][q] * ob[p][q];
        let d = oa[p][q] - ob[p][q];
        entry(d * d, ((ta[p][q] + tb[p][q] - 2.0 * phi) / n).max(0.0))
    })
}

/// m ∫₀¹ (F_m(x) − x)² dx by composite Simpson on each piece where the
/// empirical CDF is constant. Simpson is exact on those quadratic pieces.
pub fn cvm_quadrature(u: &[f64]) -> f64 {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut knots = vec![0.0];
    knots.extend(&v);
    knots.push(1.0);
    let mut total = 0.0;
    for (j, w) in knots.windows(2).enumerate() {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let level = j as f64 / m;
        let f = |x: f64| (level - x) * (level - x);
        let mid = 0.5 * (lo + hi);
        total += (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi));
    }
    m * total
}
