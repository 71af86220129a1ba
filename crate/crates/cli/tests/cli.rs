use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funcov::simgen::{gen_independent, gen_paired, IndependentSimConfig, PairedSimConfig};
use funcov::{test_independent, test_paired, TestOptions};
use funcov_cli::io::{parse_trial_csv, parse_two_sample_csv, write_two_sample_csv};
use serde_json::Value;
use tempfile::TempDir;

fn funcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcov")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(validator: &jsonschema::Validator, value: &Value) {
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}\n{value}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TWO_GROUPS: &str = "\
id,group,t0,t1,t2,t3
a,1,0.1,0.5,-0.2,0.3
b,1,1.0,-0.4,0.2,0.0
c,1,-0.3,0.8,0.6,-1.0
d,2,0.2,0.1,0.4,-0.5
e,2,-0.7,0.3,-0.1,0.9
f,2,0.4,-0.6,0.5,0.1
";

#[test]
fn identical_groups_give_zero_statistic() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("id,group,t0,t1,t2,t3\n");
    for (g, tag) in [(1, "x"), (2, "y")] {
        for (i, row) in ["0.1,0.5,-0.2,0.3", "1.0,-0.4,0.2,0.0", "-0.3,0.8,0.6,-1.0"].iter().enumerate() {
            text.push_str(&format!("{tag}{i},{g},{row}\n"));
        }
    }
    let path = write(&dir, "same.csv", &text);
    let out = json(&funcov(&["test", p(&path), "--permutations", "50"]));
    assert_eq!(out["statistic"], 0.0);
    assert_eq!(out["p_permutation"], 1.0);
    assert_valid(&schema("test_result.schema.json"), &out);
}

#[test]
fn input_errors_exit_with_two_and_name_the_row() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("ragged.csv", "id,group,t0,t1\na,1,0.1,0.2\nb,2,0.3\n", "row 3"),
        ("text.csv", "id,group,t0,t1\na,1,0.1,zero\nb,2,0.3,0.1\n", "row 2, column t1"),
        ("group.csv", "id,group,t0,t1\na,3,0.1,0.2\n", "group must be 1 or 2"),
        ("header.csv", "curve,group,t0,t1\na,1,0.1,0.2\n", "header must start with id,group"),
        ("dup.csv", "id,group,pair_id,t0,t1\na,1,p1,0.1,0.2\nb,1,p1,0.3,0.4\n", "duplicate pair_id 'p1'"),
        ("empty_group.csv", "id,group,t0,t1\na,1,0.1,0.2\nb,1,0.3,0.1\n", "group 2 has no curves"),
    ];
    for (name, text, needle) in cases {
        let path = write(&dir, name, text);
        let out = funcov(&["test", p(&path)]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
    let missing = dir.path().join("absent.csv");
    assert_eq!(funcov(&["test", p(&missing)]).status.code(), Some(2));
}

#[test]
fn paired_mode_requires_pair_ids() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "groups.csv", TWO_GROUPS);
    let out = funcov(&["test", p(&path), "--paired"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("paired mode requires pair_id"), "{}", stderr(&out));
}

#[test]
fn non_uniform_grid_file_is_rejected() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "groups.csv", TWO_GROUPS);
    let grid = write(&dir, "grid.txt", "0\n0.2\n0.7\n1\n");
    let out = funcov(&["test", p(&path), "--grid", p(&grid)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grid must be uniform"), "{}", stderr(&out));
    let short = write(&dir, "short.txt", "0,0.5,1");
    assert_eq!(funcov(&["test", p(&path), "--grid", p(&short)]).status.code(), Some(2));
    let good = write(&dir, "good.txt", "0, 0.3333333333333333, 0.6666666666666666, 1");
    assert!(funcov(&["test", p(&path), "--grid", p(&good), "--permutations", "10"]).status.success());
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let text = "id,group,t0,t1,t2\na,1,1,1,1\nb,1,1,1,1\nc,2,2,2,2\nd,2,2,2,2\n";
    let path = write(&dir, "flat.csv", text);
    let out = funcov(&["test", p(&path)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn invalid_flags_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "groups.csv", TWO_GROUPS);
    assert_eq!(funcov(&["test", p(&path), "--pve", "1.5"]).status.code(), Some(2));
    assert_eq!(funcov(&["test", p(&path), "--permutations", "-3"]).status.code(), Some(2));
    assert_eq!(funcov(&["simulate", "--design", "paired", "--rho", "1.2", "--replicates", "1"]).status.code(), Some(2));
    assert_eq!(funcov(&["simulate", "--design", "independent", "--n", "1", "--replicates", "1"]).status.code(), Some(2));
    assert_eq!(funcov(&["simulate", "--design", "supplement", "--scenario", "diagonal"]).status.code(), Some(2));
    assert_eq!(funcov(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn csv_round_trip_reproduces_in_memory_results() {
    let dir = TempDir::new().unwrap();
    let (a, b) = gen_independent(&IndependentSimConfig { n_grid: 60, ..IndependentSimConfig::new(0.5, 0.3, 30, 12) }).unwrap();
    let path = dir.path().join("sim.csv");
    write_two_sample_csv(std::fs::File::create(&path).unwrap(), &a, &b).unwrap();
    let parsed = parse_two_sample_csv(&path, None).unwrap();
    assert_eq!(parsed.group1.values(), a.values());
    assert_eq!(parsed.group2.values(), b.values());

    let opts = TestOptions { permutations: 200, seed: 8, ..TestOptions::default() };
    let expected = test_independent(&a, &b, &opts).unwrap();
    let out = json(&funcov(&["test", p(&path), "--permutations", "200", "--seed", "8"]));
    assert_eq!(out["statistic"].as_f64().unwrap().to_bits(), expected.statistic.to_bits());
    assert_eq!(out["p_permutation"].as_f64(), expected.p_permutation);
    assert_eq!(out["p_asymptotic"].as_f64(), expected.p_asymptotic);
    assert_eq!(out["k"].as_u64(), Some(expected.k as u64));

    let (c, d) = gen_paired(&PairedSimConfig { n_grid: 50, ..PairedSimConfig::new(0.6, 0.2, 25, 4) }).unwrap();
    let path = dir.path().join("paired.csv");
    write_two_sample_csv(std::fs::File::create(&path).unwrap(), &c, &d).unwrap();
    let expected = test_paired(&c, &d, &opts).unwrap();
    let out = json(&funcov(&["test", p(&path), "--paired", "--permutations", "200", "--seed", "8"]));
    assert_eq!(out["statistic"].as_f64().unwrap().to_bits(), expected.statistic.to_bits());
    assert_eq!(out["p_permutation"].as_f64(), expected.p_permutation);
    assert_eq!(out["paired"], true);
}

#[test]
fn test_output_is_independent_of_thread_count() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sim.csv");
    let gen = funcov(&["generate", "--design", "paired", "--n", "30", "--grid-points", "40", "--seed", "2", "--out", p(&path)]);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let run = |threads: &str| funcov(&["test", p(&path), "--paired", "--permutations", "300", "--threads", threads]).stdout;
    assert_eq!(run("1"), run("3"));
}

#[test]
fn two_sample_parse_shapes() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "tiny.csv", "id,group,t0,t1,t2\na,1,1,2,3\nb,2,4,5,6\n");
    let s = parse_two_sample_csv(&path, None).unwrap();
    assert_eq!(s.group1.values().shape(), (1, 3));
    assert_eq!(s.group2.values().shape(), (1, 3));
    assert_eq!(s.group2.values()[(0, 2)], 6.0);
    assert!(!s.has_pair_ids);
}

fn trial_csv(trials: usize, neurons: usize, points: usize, skip: Option<(usize, usize)>) -> String {
    let mut text = String::from("trial,neuron");
    for j in 0..points {
        text.push_str(&format!(",t{j}"));
    }
    text.push('\n');
    for t in 0..trials {
        for n in 0..neurons {
            if skip == Some((t, n)) {
                continue;
            }
            text.push_str(&format!("tr{t},n{n}"));
            for j in 0..points {
                text.push_str(&format!(",{}", ((t * 31 + n * 7 + j) % 13) as f64 * 0.25 - 1.0));
            }
            text.push('\n');
        }
    }
    text
}

#[test]
fn trial_parse_shapes_and_gaps() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "small.csv", &trial_csv(2, 2, 4, None));
    let ds = parse_trial_csv(&path, None).unwrap();
    assert_eq!((ds.n_trials(), ds.n_neurons(), ds.n_points()), (2, 2, 4));

    let path = write(&dir, "gap.csv", &trial_csv(2, 2, 4, Some((1, 0))));
    let out = funcov(&["global", p(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("(trial 'tr1', neuron 'n0')"), "{}", stderr(&out));

    let mut many = trial_csv(3, 14, 3, None);
    many = many.lines().filter(|l| !l.starts_with("tr2,")).collect::<Vec<_>>().join("\n");
    many.push_str("\ntr2,n0,1,2,3\ntr2,n1,3,2,1\n");
    let path = write(&dir, "many_gaps.csv", &many);
    let err = parse_trial_csv(&path, None).unwrap_err().to_string();
    assert!(err.contains("12 missing") && err.matches("(trial '").count() == 10, "{err}");

    let path = write(&dir, "dup.csv", "trial,neuron,t0,t1\nA,x,1,2\nA,x,3,4\n");
    assert!(parse_trial_csv(&path, None).unwrap_err().to_string().contains("row 3"));
}

#[test]
fn parses_a_recording_sized_trial_file() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "big.csv", &trial_csv(157, 25, 174, None));
    let ds = parse_trial_csv(&path, None).unwrap();
    assert_eq!((ds.n_trials(), ds.n_neurons(), ds.n_points()), (157, 25, 174));
}

#[test]
fn global_output_validates_and_respects_bounds() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("trials.csv");
    let gen = funcov(&["generate", "--design", "trials", "--trials", "2", "--n", "10", "--grid-points", "30", "--out", p(&path)]);
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = json(&funcov(&["global", p(&path), "--permutations", "50", "--global-permutations", "20", "--seed", "4"]));
    assert_valid(&schema("global_result.schema.json"), &out);
    assert_eq!(out["comparisons"], 1);
    let eta = out["eta_observed"].as_f64().unwrap();
    assert!((1.0 / 12.0..=1.0 / 3.0).contains(&eta), "{eta}");
    assert_eq!(out["pvalue_histogram"]["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 1);

    let path = dir.path().join("four.csv");
    funcov(&["generate", "--design", "trials", "--trials", "4", "--n", "10", "--grid-points", "30", "--out", p(&path)]);
    let run = |threads: &str| {
        funcov(&["global", p(&path), "--permutations", "30", "--global-permutations", "10", "--threads", threads]).stdout
    };
    let first = run("1");
    assert_eq!(first, run("4"));
    let value: Value = serde_json::from_slice(&first).unwrap();
    assert_valid(&schema("global_result.schema.json"), &value);
    let asymptotic = json(&funcov(&["global", p(&path), "--asymptotic-pairwise", "--global-permutations", "10"]));
    assert_eq!(asymptotic["pairwise"], "asymptotic");
}

#[test]
fn simulate_is_deterministic_and_well_formed() {
    let args = [
        "simulate", "--design", "paired", "--rho", "0.2,0.8", "--delta", "0.5", "--n", "20", "--replicates", "1",
        "--permutations", "20", "--grid-points", "40", "--seed", "3",
    ];
    let first = funcov(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(first.stdout, funcov(&args).stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("design,test,gamma,rho,scenario,delta,n,sigma2,pve,replicates,rejection_rate,mean_k,seed")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("paired,paired,,0.2,,0.5,20,0.25,0.99,1,"), "{}", rows[0]);
    assert!(rows[1].starts_with("paired,independent,,0.2,"), "{}", rows[1]);

    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json", "--pve", "0.95,0.999"]);
    let value = json(&funcov(&json_args));
    assert_valid(&schema("simulation_rows.schema.json"), &value);
    assert_eq!(value.as_array().unwrap().len(), 8);

    let supp = json(&funcov(&[
        "simulate", "--design", "supplement", "--scenario", "null", "--n", "15", "--replicates", "1", "--permutations",
        "10", "--grid-points", "30", "--format", "json",
    ]));
    assert_eq!(supp[0]["scenario"], "null");
    assert_valid(&schema("simulation_rows.schema.json"), &supp);
}
