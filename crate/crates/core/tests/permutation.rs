use funcov::simgen::{gen_independent, gen_paired, gen_trials, IndependentSimConfig, PairedSimConfig, TrialSimConfig};
use funcov::study::{run_cell, Cell, Design};
use funcov::{global_test, test_independent, test_paired, GlobalOptions, PermutationMode, TestOptions};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (a, b) = gen_independent(&IndependentSimConfig::new(0.5, 0.3, 30, 4)).unwrap();
    let opts = TestOptions { permutations: 300, seed: 17, ..TestOptions::default() };
    let one = in_pool(1, || test_independent(&a, &b, &opts).unwrap());
    let four = in_pool(4, || test_independent(&a, &b, &opts).unwrap());
    assert_eq!(one, four);

    let (c, d) = gen_paired(&PairedSimConfig::new(0.6, 0.3, 25, 8)).unwrap();
    let full = TestOptions { permutations: 40, seed: 3, mode: PermutationMode::FullPipeline, ..TestOptions::default() };
    let one = in_pool(1, || test_paired(&c, &d, &full).unwrap());
    let three = in_pool(3, || test_paired(&c, &d, &full).unwrap());
    assert_eq!(one, three);

    let ds = gen_trials(&TrialSimConfig::new(4, 12, 30, 5)).unwrap();
    let g = GlobalOptions { per_pair_permutations: 30, global_permutations: 20, ..GlobalOptions::default() };
    let one = in_pool(1, || global_test(&ds, &g, 99).unwrap());
    let five = in_pool(5, || global_test(&ds, &g, 99).unwrap());
    assert_eq!(one, five);
}

#[test]
fn identical_groups_have_zero_statistic() {
    let (a, _) = gen_independent(&IndependentSimConfig::new(0.5, 0.0, 20, 1)).unwrap();
    let r = test_independent(&a, &a, &TestOptions { permutations: 99, ..TestOptions::default() }).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_permutation, Some(1.0));
    let ids = a.clone().with_index_ids().unwrap();
    let r = test_paired(&ids, &ids, &TestOptions { permutations: 99, ..TestOptions::default() }).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.p_permutation, Some(1.0));
}

#[test]
fn permutation_p_values_lie_on_the_lattice() {
    let (a, b) = gen_independent(&IndependentSimConfig::new(0.0, 0.5, 40, 2)).unwrap();
    let r = test_independent(&a, &b, &TestOptions { permutations: 199, seed: 5, ..TestOptions::default() }).unwrap();
    let p = r.p_permutation.unwrap();
    assert!((1.0 / 200.0..=1.0).contains(&p));
    assert!(((p * 200.0).round() - p * 200.0).abs() < 1e-9);
    assert_eq!(r.null_statistics.len(), 199);
}

#[test]
fn small_null_study_is_roughly_calibrated() {
    let mut cell = Cell::new(Design::Independent { gamma: 0.5, delta: 0.0 }, 40, 120, 2024);
    cell.permutations = 99;
    cell.n_grid = 60;
    let out = run_cell(&cell).unwrap();
    assert!(out[0].rejection_rate <= 0.15, "{}", out[0].rejection_rate);
}

#[test]
fn large_effect_is_detected() {
    let mut cell = Cell::new(Design::Independent { gamma: 0.0, delta: 2.0 }, 100, 30, 7);
    cell.permutations = 99;
    cell.n_grid = 60;
    let out = run_cell(&cell).unwrap();
    assert!(out[0].rejection_rate >= 0.8, "{}", out[0].rejection_rate);
}
