use std::io::Write;
use std::time::Instant;

use funcov::global::quantile;
use funcov::simgen::{
    gen_independent, gen_paired, gen_supplement, gen_trials, IndependentSimConfig, PairedSimConfig, Scenario,
    SupplementSimConfig, TrialSimConfig,
};
use funcov::study::{run_cell, Cell, Design};
use funcov::{
    global_test, test_independent, test_paired, GlobalOptions, PairwisePvalue, PermutationMode, TestOptions,
    TestResult,
};
use serde::Serialize;

use crate::args::{Common, DesignName, Format, GenerateArgs, GenerateDesign, GlobalArgs, SimulateArgs, TestArgs};
use crate::error::{CliError, CliResult};
use crate::io::{parse_trial_csv, parse_two_sample_csv, write_trial_csv, write_two_sample_csv};

/// Bins of the pairwise p-value histogram in `global` output.
pub const HISTOGRAM_BINS: usize = 20;

fn mode(full_pipeline: bool) -> PermutationMode {
    if full_pipeline {
        PermutationMode::FullPipeline
    } else {
        PermutationMode::Scores
    }
}

fn check_unit(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must lie in (0, 1), got {v}")))
    }
}

/// Writes `bytes` to the `--out` file, or standard output.
fn emit(common: &Common, bytes: &[u8]) -> CliResult<()> {
    match &common.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("result types serialise");
    bytes.push(b'\n');
    bytes
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Usage(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Usage(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct TestOutput<'a> {
    #[serde(flatten)]
    result: &'a TestResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reject: Option<bool>,
}

pub fn cmd_test(args: &TestArgs) -> CliResult<()> {
    if let Some(alpha) = args.alpha {
        check_unit("alpha", alpha)?;
    }
    check_unit("pve", args.pve)?;
    let data = parse_two_sample_csv(&args.input, args.grid.as_deref())?;
    let opts = TestOptions {
        pve: args.pve,
        permutations: args.permutations,
        seed: args.common.seed,
        mode: mode(args.full_pipeline_permutation),
    };
    let result = if args.paired {
        if !data.has_pair_ids {
            return Err(CliError::input(&args.input, "paired mode requires pair_id column"));
        }
        test_paired(&data.group1, &data.group2, &opts)?
    } else {
        test_independent(&data.group1, &data.group2, &opts)?
    };
    let reject = args.alpha.map(|a| result.rejects(a));
    let bytes = match args.format {
        Format::Json => json_bytes(&TestOutput { result: &result, alpha: args.alpha, reject }),
        Format::Csv => {
            let r = &result;
            let row = vec![
                r.statistic.to_string(),
                opt(r.p_asymptotic),
                opt(r.p_permutation),
                r.k.to_string(),
                r.pve_achieved.to_string(),
                (r.argmax.0 + 1).to_string(),
                (r.argmax.1 + 1).to_string(),
                r.n1.to_string(),
                r.n2.to_string(),
                r.permutations.to_string(),
                r.seed.to_string(),
                r.paired.to_string(),
                opt(args.alpha),
                reject.map(|b| b.to_string()).unwrap_or_default(),
            ];
            csv_bytes(
                &[
                    "statistic",
                    "p_asymptotic",
                    "p_permutation",
                    "k",
                    "pve_achieved",
                    "argmax_p",
                    "argmax_q",
                    "n1",
                    "n2",
                    "permutations",
                    "seed",
                    "paired",
                    "alpha",
                    "reject",
                ],
                &[row],
            )?
        }
    };
    emit(&args.common, &bytes)
}

/// One output row of `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationRow {
    pub design: &'static str,
    pub test: &'static str,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub scenario: Option<&'static str>,
    pub delta: Option<f64>,
    pub n: usize,
    pub sigma2: f64,
    pub pve: f64,
    pub replicates: usize,
    pub rejection_rate: f64,
    pub mean_k: f64,
    pub seed: u64,
}

const SIMULATION_COLUMNS: [&str; 13] = [
    "design",
    "test",
    "gamma",
    "rho",
    "scenario",
    "delta",
    "n",
    "sigma2",
    "pve",
    "replicates",
    "rejection_rate",
    "mean_k",
    "seed",
];

impl SimulationRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.design.into(),
            self.test.into(),
            opt(self.gamma),
            opt(self.rho),
            self.scenario.unwrap_or_default().into(),
            opt(self.delta),
            self.n.to_string(),
            self.sigma2.to_string(),
            self.pve.to_string(),
            self.replicates.to_string(),
            self.rejection_rate.to_string(),
            self.mean_k.to_string(),
            self.seed.to_string(),
        ]
    }
}

fn designs(args: &SimulateArgs) -> CliResult<Vec<Design>> {
    let bad = |flag: &str, v: &dyn std::fmt::Display, why: &str| {
        Err(CliError::Usage(format!("--{flag} value {v} {why}")))
    };
    if let Some(d) = args.delta.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return bad("delta", d, "must be finite and non-negative");
    }
    Ok(match args.design {
        DesignName::Independent => {
            if let Some(g) = args.gamma.iter().find(|g| !g.is_finite() || **g < 0.0) {
                return bad("gamma", g, "must be finite and non-negative");
            }
            args.gamma
                .iter()
                .flat_map(|&gamma| args.delta.iter().map(move |&delta| Design::Independent { gamma, delta }))
                .collect()
        }
        DesignName::Paired => {
            if let Some(r) = args.rho.iter().find(|r| r.is_nan() || r.abs() >= 1.0) {
                return bad("rho", r, "must lie in (-1, 1)");
            }
            args.rho
                .iter()
                .flat_map(|&rho| args.delta.iter().map(move |&delta| Design::Paired { rho, delta }))
                .collect()
        }
        DesignName::Supplement => args
            .scenario
            .iter()
            .map(|s| Ok(Design::Supplement { scenario: s.parse::<Scenario>()? }))
            .collect::<CliResult<Vec<_>>>()?,
    })
}

pub fn simulation_rows(args: &SimulateArgs) -> CliResult<Vec<SimulationRow>> {
    check_unit("alpha", args.alpha)?;
    for &p in &args.pve {
        check_unit("pve", p)?;
    }
    if let Some(n) = args.n.iter().find(|n| **n < 2) {
        return Err(CliError::Usage(format!("--n value {n} must be at least 2")));
    }
    if let Some(s) = args.sigma2.iter().find(|s| !s.is_finite() || **s < 0.0) {
        return Err(CliError::Usage(format!("--sigma2 value {s} must be finite and non-negative")));
    }
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    if args.grid_points < 2 {
        return Err(CliError::Usage("--grid-points must be at least 2".into()));
    }
    let designs = designs(args)?;
    let mut cells = Vec::new();
    for &design in &designs {
        for &n in &args.n {
            for &sigma2 in &args.sigma2 {
                for &pve in &args.pve {
                    cells.push(Cell {
                        noise_var: sigma2,
                        n_grid: args.grid_points,
                        pve,
                        permutations: args.permutations,
                        mode: mode(args.full_pipeline_permutation),
                        alpha: args.alpha,
                        ..Cell::new(design, n, args.replicates, args.common.seed)
                    });
                }
            }
        }
    }
    let mut rows = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let start = Instant::now();
        let outcomes = run_cell(cell)?;
        eprintln!("cell {}/{}: {:?}, n={} in {:.1}s", i + 1, cells.len(), cell.design, cell.n, start.elapsed().as_secs_f64());
        let (gamma, rho, scenario, delta) = match cell.design {
            Design::Independent { gamma, delta } => (Some(gamma), None, None, Some(delta)),
            Design::Paired { rho, delta } => (None, Some(rho), None, Some(delta)),
            Design::Supplement { scenario } => (None, None, Some(scenario.name()), None),
        };
        for o in outcomes {
            rows.push(SimulationRow {
                design: cell.design.name(),
                test: o.test,
                gamma,
                rho,
                scenario,
                delta,
                n: cell.n,
                sigma2: cell.noise_var,
                pve: cell.pve,
                replicates: o.replicates,
                rejection_rate: o.rejection_rate,
                mean_k: o.mean_k,
                seed: cell.seed,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let rows = simulation_rows(args)?;
    let bytes = match args.format {
        Format::Csv => csv_bytes(&SIMULATION_COLUMNS, &rows.iter().map(SimulationRow::fields).collect::<Vec<_>>())?,
        Format::Json => json_bytes(&rows),
    };
    emit(&args.common, &bytes)
}

#[derive(Debug, Serialize)]
struct NullSummary {
    min: f64,
    max: f64,
    q95: f64,
    values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Histogram {
    bins: usize,
    counts: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct PairPvalue {
    trials: [String; 2],
    p: f64,
}

#[derive(Debug, Serialize)]
struct GlobalOutput {
    n_trials: usize,
    n_neurons: usize,
    n_points: usize,
    comparisons: usize,
    pve: f64,
    per_pair_permutations: usize,
    global_permutations: usize,
    pairwise: PairwisePvalue,
    seed: u64,
    eta_observed: f64,
    eta_integral: f64,
    eta_null: NullSummary,
    p_global: f64,
    alpha: f64,
    reject: bool,
    pvalue_histogram: Histogram,
    pairwise_pvalues: Vec<PairPvalue>,
}

pub fn cmd_global(args: &GlobalArgs) -> CliResult<()> {
    check_unit("alpha", args.alpha)?;
    check_unit("pve", args.pve)?;
    let ds = parse_trial_csv(&args.input, args.grid.as_deref())?;
    let opts = GlobalOptions {
        pve: args.pve,
        per_pair_permutations: args.permutations,
        global_permutations: args.global_permutations,
        pairwise: if args.asymptotic_pairwise { PairwisePvalue::Asymptotic } else { PairwisePvalue::Permutation },
        mode: mode(args.full_pipeline_permutation),
    };
    let start = Instant::now();
    let r = global_test(&ds, &opts, args.common.seed)?;
    eprintln!(
        "{} trials x {} neurons, {} comparisons, {} permutations in {:.1}s",
        ds.n_trials(),
        ds.n_neurons(),
        r.comparisons,
        r.global_permutations,
        start.elapsed().as_secs_f64()
    );
    let fold = |init: f64, f: fn(f64, f64) -> f64| r.eta_null.iter().copied().fold(init, f);
    let summary = NullSummary {
        min: fold(f64::INFINITY, f64::min),
        max: fold(f64::NEG_INFINITY, f64::max),
        q95: quantile(&r.eta_null, 0.95),
        values: r.eta_null.clone(),
    };
    let ids = ds.trial_ids();
    let output = GlobalOutput {
        n_trials: r.n_trials,
        n_neurons: r.n_neurons,
        n_points: ds.n_points(),
        comparisons: r.comparisons,
        pve: r.pve,
        per_pair_permutations: r.per_pair_permutations,
        global_permutations: r.global_permutations,
        pairwise: r.pairwise,
        seed: r.seed,
        eta_observed: r.eta_observed,
        eta_integral: r.eta_integral,
        eta_null: summary,
        p_global: r.p_global,
        alpha: args.alpha,
        reject: r.rejects(args.alpha),
        pvalue_histogram: Histogram { bins: HISTOGRAM_BINS, counts: r.pvalue_histogram(HISTOGRAM_BINS) },
        pairwise_pvalues: ds
            .pairs()
            .iter()
            .zip(&r.pairwise_pvalues)
            .map(|(&(a, b), &p)| PairPvalue { trials: [ids[a].clone(), ids[b].clone()], p })
            .collect(),
    };
    let bytes = match args.format {
        Format::Json => json_bytes(&output),
        Format::Csv => {
            let o = &output;
            csv_bytes(
                &[
                    "n_trials",
                    "n_neurons",
                    "comparisons",
                    "eta_observed",
                    "eta_null_min",
                    "eta_null_max",
                    "eta_null_q95",
                    "p_global",
                    "reject",
                ],
                &[vec![
                    o.n_trials.to_string(),
                    o.n_neurons.to_string(),
                    o.comparisons.to_string(),
                    o.eta_observed.to_string(),
                    o.eta_null.min.to_string(),
                    o.eta_null.max.to_string(),
                    o.eta_null.q95.to_string(),
                    o.p_global.to_string(),
                    o.reject.to_string(),
                ]],
            )?
        }
    };
    emit(&args.common, &bytes)
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let seed = args.common.seed;
    let mut bytes = Vec::new();
    match args.design {
        GenerateDesign::Independent => {
            let cfg = IndependentSimConfig {
                noise_var: args.sigma2,
                n_grid: args.grid_points,
                ..IndependentSimConfig::new(args.gamma, args.delta, args.n, seed)
            };
            let (a, b) = gen_independent(&cfg)?;
            write_two_sample_csv(&mut bytes, &a, &b)?;
        }
        GenerateDesign::Paired => {
            let cfg = PairedSimConfig {
                noise_var: args.sigma2,
                n_grid: args.grid_points,
                ..PairedSimConfig::new(args.rho, args.delta, args.n, seed)
            };
            let (a, b) = gen_paired(&cfg)?;
            write_two_sample_csv(&mut bytes, &a, &b)?;
        }
        GenerateDesign::Supplement => {
            let cfg = SupplementSimConfig {
                n_grid: args.grid_points,
                ..SupplementSimConfig::new(args.scenario.parse()?, args.sigma2, args.n, seed)
            };
            let (a, b) = gen_supplement(&cfg)?;
            write_two_sample_csv(&mut bytes, &a, &b)?;
        }
        GenerateDesign::Trials => {
            let cfg = TrialSimConfig { noise_var: args.sigma2, ..TrialSimConfig::new(args.trials, args.n, args.grid_points, seed) };
            write_trial_csv(&mut bytes, &gen_trials(&cfg)?)?;
        }
    }
    emit(&args.common, &bytes)
}

/// Installs the global worker pool; 0 threads means one per core.
pub fn configure_threads(threads: usize) -> CliResult<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}
