mod common;

use common::{channel, random_ket};
use icshadow::estimator::{record_estimate, write_results_csv, ResultRow};
use icshadow::{
    builtin_povm, chebyshev_samples, estimate, exact_expectation, ghz, max_error,
    required_samples, sample, sample_dense, variance_bound, DenseState, EstimatorMethod,
    PauliAxis, PauliObservable, SampleBudget, ShadowEnsemble,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shuffled(e: &ShadowEnsemble, seed: u64) -> ShadowEnsemble {
    let mut rows: Vec<Vec<u8>> = e.records().map(|r| r.outcomes().to_vec()).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ShadowEnsemble::new(e.num_qubits(), e.k(), e.povm(), None, e.seeds().to_vec(), rows.concat()).unwrap()
}

#[test]
fn mean_is_invariant_under_record_order() {
    let mps = ghz(5).unwrap();
    let ch = channel("pauli4", None);
    let table = ch.factor_table();
    let e = sample(&mps, ch.povm(), 20_000, 41).unwrap();
    let obs: PauliObservable = "x0 x1 x2 x3 x4".parse().unwrap();
    let a = estimate(&e, &obs, &table, EstimatorMethod::Mean).unwrap();
    let b = estimate(&shuffled(&e, 1), &obs, &table, EstimatorMethod::Mean).unwrap();
    assert!((a.value - b.value).abs() < 1e-12);
    assert!((a.std - b.std).abs() < 1e-12);
}

#[test]
fn relabeling_qubits_relabels_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let state = DenseState::pure(random_ket(3, &mut rng)).unwrap();
    let ch = channel("tetra", None);
    let table = ch.factor_table();
    let e = sample_dense(&state, ch.povm(), 5_000, 42).unwrap();
    let perm = [2usize, 0, 1];
    let moved: Vec<u8> = e
        .records()
        .flat_map(|r| {
            let mut out = [0u8; 3];
            for (i, &p) in perm.iter().enumerate() {
                out[p] = r.outcome(i) as u8;
            }
            out
        })
        .collect();
    let moved = ShadowEnsemble::new(3, e.k(), e.povm(), None, vec![], moved).unwrap();
    let obs: PauliObservable = "x0 y1 z2".parse().unwrap();
    let obs_moved = PauliObservable::new(
        1.0,
        obs.support().iter().map(|&(s, a)| (perm[s], a)).collect(),
    )
    .unwrap();
    let a = estimate(&e, &obs, &table, EstimatorMethod::Mean).unwrap().value;
    let b = estimate(&moved, &obs_moved, &table, EstimatorMethod::Mean).unwrap().value;
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn mean_and_median_of_means_agree() {
    let mps = ghz(8).unwrap();
    for name in ["pauli6", "pauli4", "tetra"] {
        let ch = channel(name, None);
        let table = ch.factor_table();
        let e = sample(&mps, ch.povm(), 50_000, 43).unwrap();
        for j in 1..8 {
            let obs = PauliObservable::two_point(0, j, PauliAxis::Z).unwrap();
            let mean = estimate(&e, &obs, &table, EstimatorMethod::Mean).unwrap();
            let mom = estimate(&e, &obs, &table, EstimatorMethod::MedianOfMeans { batches: 12 }).unwrap();
            assert!((mean.value - mom.value).abs() < 4.0 * mean.std_error * 12f64.sqrt() / 2.0, "{name} {obs}");
            assert!((mean.value - 1.0).abs() < 5.0 * mean.std_error, "{name} {obs}: {}", mean.value);
        }
    }
}

#[test]
fn noisy_records_are_debiased() {
    let mps = ghz(4).unwrap();
    let noise = icshadow::NoiseModel::amplitude_damping(0.2).unwrap();
    let ch = channel("pauli6", Some(&noise));
    let table = ch.factor_table();
    let e = icshadow::sample_noisy(&mps, &builtin_povm("pauli6").unwrap(), &noise, 100_000, 44).unwrap();
    for text in ["z0 z3", "x0 x1 x2 x3", "z1"] {
        let obs: PauliObservable = text.parse().unwrap();
        let truth = exact_expectation(&mps, &obs).unwrap();
        let est = estimate(&e, &obs, &table, EstimatorMethod::Mean).unwrap();
        assert!((est.value - truth).abs() < 5.0 * est.std_error, "{text}: {} vs {truth}", est.value);
    }
    // the noiseless table is refused for noisy records
    let clean = channel("pauli6", None).factor_table();
    let obs = PauliObservable::single(0, PauliAxis::Z);
    assert!(estimate(&e, &obs, &clean, EstimatorMethod::Mean).is_err());
}

#[test]
fn empirical_second_moment_respects_the_bound() {
    let mps = ghz(4).unwrap();
    for name in ["pauli6", "tetra", "pauli4"] {
        let ch = channel(name, None);
        let table = ch.factor_table();
        let e = sample(&mps, ch.povm(), 100_000, 45).unwrap();
        for text in ["z0 z1", "x0 y1 z2", "x0 x1 x2 x3"] {
            let obs: PauliObservable = text.parse().unwrap();
            let sq: Vec<f64> = e
                .records()
                .map(|r| record_estimate(r.outcomes(), &obs, &table).powi(2))
                .collect();
            let n = sq.len() as f64;
            let m2 = sq.iter().sum::<f64>() / n;
            let se = (sq.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            let bound = variance_bound(&table, &obs, Some(&mps)).unwrap();
            assert!((m2 - bound).abs() < 5.0 * se, "{name} {text}: {m2} vs {bound} (se {se})");
        }
    }
}

#[test]
fn state_independent_bound_needs_no_state() {
    let table = channel("pauli6", None).factor_table();
    let obs: PauliObservable = "z0 x1".parse().unwrap();
    assert!((variance_bound(&table, &obs, None).unwrap() - 9.0).abs() < 1e-12);
    let pauli4 = channel("pauli4", None).factor_table();
    assert!(variance_bound(&pauli4, &obs, None).is_err());
}

#[test]
fn sample_count_examples() {
    assert_eq!(required_samples(36.0, 1, 0.1, 0.05).unwrap(), 6640);
    assert_eq!(required_samples(324.0, 15, 0.3, 0.1 / 58.0).unwrap(), 17_576);
    assert_eq!(chebyshev_samples(4.0, 0.05, 0.1).unwrap(), 16_000);
    assert!(required_samples(1.0, 0, 0.1, 0.1).is_err());
    assert!(required_samples(1.0, 1, 0.0, 0.1).is_err());
    assert!(required_samples(1.0, 1, 0.1, 1.0).is_err());
    let budget = SampleBudget::for_table(&channel("pauli6", None).factor_table(), 1, 1, 0.1, 0.05).unwrap();
    assert!((budget.b - 36.0).abs() < 1e-12);
    assert_eq!(budget.n, 6640);
}

proptest! {
    #[test]
    fn sample_count_is_monotone(b in 0.5..500.0f64, l in 1usize..1000, eps in 0.01..1.0f64, delta in 0.001..0.5f64) {
        let n = required_samples(b, l, eps, delta).unwrap();
        prop_assert!(n >= 1);
        prop_assert!(required_samples(b, l + 1, eps, delta).unwrap() >= n);
        prop_assert!(required_samples(b, l, eps * 0.9, delta).unwrap() >= n);
        prop_assert!(required_samples(b, l, eps, delta * 0.5).unwrap() >= n);
        prop_assert!(required_samples(b * 2.0, l, eps, delta).unwrap() >= n);
    }
}

#[test]
fn max_error_checks_lengths() {
    assert_eq!(max_error(&[0.1, -0.5], &[0.0, 0.0]).unwrap(), 0.5);
    assert!(max_error(&[0.1], &[0.0, 0.0]).is_err());
}

#[test]
fn results_csv_has_a_header_and_one_row_per_observable() {
    let mps = ghz(3).unwrap();
    let ch = channel("pauli6", None);
    let table = ch.factor_table();
    let e = sample(&mps, ch.povm(), 1_000, 46).unwrap();
    let obs = [PauliObservable::two_point(0, 1, PauliAxis::Z).unwrap(), PauliObservable::single(2, PauliAxis::X)];
    let rows: Vec<ResultRow> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let est = estimate(&e, o, &table, EstimatorMethod::Mean).unwrap();
            ResultRow::new(i, o, EstimatorMethod::Mean, &est, Some(exact_expectation(&mps, o).unwrap()))
        })
        .collect();
    let mut out = Vec::new();
    write_results_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "observable,support,method,n,estimate,std_error,truth,abs_error");
    assert_eq!(lines.len(), 3);
}
