use serde::{Serialize, Serializer};

/// How the permutation null is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutationMode {
    /// Relabel rows of the fixed pooled score matrix.
    #[default]
    Scores,
    /// Relabel curves and rerun demeaning and pooled FPCA per replicate.
    FullPipeline,
}

/// Options shared by the two-sample tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub pve: f64,
    pub permutations: usize,
    pub seed: u64,
    pub mode: PermutationMode,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { pve: 0.99, permutations: 1000, seed: 0, mode: PermutationMode::Scores }
    }
}

/// Maximum standardised entry difference and where it was attained
/// (0-based, `p ≤ q`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxStatistic {
    pub value: f64,
    pub argmax: (usize, usize),
}

/// Observed statistic together with its permutation null.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationOutcome {
    pub observed: MaxStatistic,
    pub p_value: f64,
    pub null: Vec<f64>,
}

/// `(1 + #{null ≥ observed}) / (P + 1)`.
pub fn permutation_p_value(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&m| m >= observed).count();
    (1 + exceed) as f64 / (null.len() + 1) as f64
}

pub(crate) fn serialize_extended_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("NaN")
    } else if *v > 0.0 {
        s.serialize_str("Infinity")
    } else {
        s.serialize_str("-Infinity")
    }
}

fn serialize_one_based<S: Serializer>(v: &(usize, usize), s: S) -> Result<S::Ok, S::Error> {
    [v.0 + 1, v.1 + 1].serialize(s)
}

/// Outcome of one two-sample test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    #[serde(serialize_with = "serialize_extended_f64")]
    pub statistic: f64,
    pub p_asymptotic: Option<f64>,
    pub p_permutation: Option<f64>,
    pub k: usize,
    pub pve_achieved: f64,
    /// Component pair attaining the maximum; 0-based here, written 1-based.
    #[serde(serialize_with = "serialize_one_based")]
    pub argmax: (usize, usize),
    pub n1: usize,
    pub n2: usize,
    pub permutations: usize,
    pub seed: u64,
    pub paired: bool,
    #[serde(skip)]
    pub null_statistics: Vec<f64>,
}

impl TestResult {
    /// Permutation p-value when available, asymptotic otherwise.
    pub fn p_value(&self) -> f64 {
        self.p_permutation.or(self.p_asymptotic).unwrap_or(1.0)
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value() <= alpha
    }
}
