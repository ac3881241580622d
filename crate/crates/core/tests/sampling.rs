mod common;

use common::{channel, random_density, random_ket, random_mps};
use icshadow::sampler::{exact_outcome_distribution, sample_range};
use icshadow::{
    builtin_povm, noise_adjoint_povm, sample, sample_dense, sample_mps, sample_noisy, DenseState,
    NoiseModel, Povm, ShadowEnsemble,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn counts(e: &ShadowEnsemble) -> Vec<u64> {
    let k = e.k();
    let mut c = vec![0u64; k.pow(e.num_qubits() as u32)];
    for rec in e.records() {
        let idx = rec.outcomes().iter().fold(0usize, |acc, &a| acc * k + a as usize);
        c[idx] += 1;
    }
    c
}

/// Pearson statistic over cells with positive probability, checked against
/// `dof + 6·√(2·dof)`.
fn assert_born(e: &ShadowEnsemble, probs: &[f64]) {
    let n = e.len() as f64;
    let c = counts(e);
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for (obs, &p) in c.iter().zip(probs) {
        if p > 1e-14 {
            chi2 += (*obs as f64 - n * p).powi(2) / (n * p);
            dof += 1;
        } else {
            assert_eq!(*obs, 0, "impossible outcome drawn");
        }
    }
    let dof = (dof - 1) as f64;
    let limit = dof + 6.0 * (2.0 * dof).sqrt();
    assert!(chi2 < limit, "chi² = {chi2:.1} over {dof} dof (limit {limit:.1})");
}

#[test]
fn pure_state_records_follow_born_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let state = DenseState::pure(random_ket(3, &mut rng)).unwrap();
    for name in ["pauli6", "pauli4", "tetra"] {
        let povm = builtin_povm(name).unwrap();
        let e = sample_dense(&state, &povm, 200_000, 310).unwrap();
        assert_born(&e, &exact_outcome_distribution(&state, &povm).unwrap());
    }
}

#[test]
fn mixed_state_records_follow_born_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let state = DenseState::mixed(random_density(2, 2, &mut rng)).unwrap();
    for name in ["pauli6", "pauli4"] {
        let povm = builtin_povm(name).unwrap();
        let e = sample_dense(&state, &povm, 200_000, 320).unwrap();
        assert_born(&e, &exact_outcome_distribution(&state, &povm).unwrap());
    }
}

#[test]
fn mps_records_follow_born_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mps = random_mps(3, 2, &mut rng);
    let dense = mps.to_dense().unwrap();
    let povm = builtin_povm("tetra").unwrap();
    let e = sample_mps(&mps, &povm, 200_000, 330).unwrap();
    assert_born(&e, &exact_outcome_distribution(&dense, &povm).unwrap());
}

#[test]
fn noisy_records_follow_the_pulled_back_povm() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let state = DenseState::pure(random_ket(2, &mut rng)).unwrap();
    let povm = builtin_povm("pauli6").unwrap();
    let noise = NoiseModel::amplitude_damping(0.3).unwrap();
    let e = sample_noisy(&state, &povm, &noise, 200_000, 340).unwrap();
    assert_eq!(e.noise(), Some("amplitude_damping:0.3"));
    let adj = noise_adjoint_povm(&povm, &noise).unwrap();
    assert_born(&e, &exact_outcome_distribution(&state, &adj).unwrap());
}

#[test]
fn basis_state_never_draws_orthogonal_outcome() {
    let state = DenseState::basis(&[0, 1, 1]).unwrap();
    let povm = builtin_povm("pauli6").unwrap();
    let e = sample_dense(&state, &povm, 5_000, 35).unwrap();
    for rec in e.records() {
        assert_ne!(rec.outcome(0), 1);
        assert_ne!(rec.outcome(1), 0);
        assert_ne!(rec.outcome(2), 0);
    }
}

#[test]
fn records_do_not_depend_on_the_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let state = DenseState::pure(random_ket(4, &mut rng)).unwrap();
    let mps = random_mps(5, 3, &mut rng);
    let povm = builtin_povm("pauli4").unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                sample_dense(&state, &povm, 3_000, 360).unwrap(),
                sample_mps(&mps, &povm, 3_000, 361).unwrap(),
            )
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn split_runs_merge_into_the_full_run() {
    let mps = icshadow::ghz(6).unwrap();
    let povm = builtin_povm("tetra").unwrap();
    let full = sample(&mps, &povm, 1_000, 37).unwrap();
    let mut head = sample_range(&mps, &povm, 37, 0..400).unwrap();
    let tail = sample_range(&mps, &povm, 37, 400..1_000).unwrap();
    head.merge(&tail).unwrap();
    assert_eq!(head, full);
    assert_eq!(full.slice(400..1_000), tail);
}

#[test]
fn seeds_change_the_records() {
    let mps = icshadow::ghz(4).unwrap();
    let povm = builtin_povm("pauli6").unwrap();
    let a = sample(&mps, &povm, 200, 1).unwrap();
    let b = sample(&mps, &povm, 200, 2).unwrap();
    assert_ne!(a.outcomes(), b.outcomes());
}

#[test]
fn invalid_povm_is_refused() {
    let povm = builtin_povm("pauli6").unwrap();
    let short: Vec<_> = (0..5).map(|a| *povm.element(a)).collect();
    let bad = Povm::from_elements("short", short);
    let state = DenseState::basis(&[0]).unwrap();
    assert!(sample_dense(&state, &bad, 10, 0).is_err());
}

#[test]
fn saved_records_load_back() {
    let mps = icshadow::ghz(3).unwrap();
    let ch = channel("pauli6", None);
    let e = sample(&mps, ch.povm(), 300, 38).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.bin");
    e.save(&path).unwrap();
    assert_eq!(ShadowEnsemble::load(&path).unwrap(), e);
}
