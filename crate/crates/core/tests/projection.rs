mod common;

use common::{channel, random_density, random_ket};
use icshadow::fidelity::{read_matrix, write_matrix};
use icshadow::{
    estimate, fidelity_pure, ghz, hypothesis_state, project_to_physical,
    sample, simplex_project, EstimatorMethod, PauliObservable, C64,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
    // unit trace, like a hypothesis state
    let shift = (C64::new(1.0, 0.0) - h.trace()) / C64::new(d as f64, 0.0);
    h + DMatrix::identity(d, d) * shift
}

fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    g.qr().q()
}

fn frob(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn assert_density(rho: &DMatrix<C64>) {
    assert!((rho.trace().re - 1.0).abs() < 1e-10);
    assert!(frob(rho, &rho.adjoint()) < 1e-10);
    let min = rho.clone().symmetric_eigenvalues().min();
    assert!(min > -1e-10, "eigenvalue {min}");
}

proptest! {
    #[test]
    fn simplex_projection_lands_on_the_simplex(v in prop::collection::vec(-3.0..3.0f64, 1..20)) {
        let p = simplex_project(&v).unwrap();
        let x = p.values();
        prop_assert!(x.iter().all(|&xi| xi >= 0.0));
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // idempotent
        let again = simplex_project(x).unwrap();
        for (a, b) in again.values().iter().zip(x) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // order preserving
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(x[i] >= x[j]);
                }
            }
        }
    }

    #[test]
    fn simplex_projection_is_nearest(v in prop::collection::vec(-2.0..2.0f64, 2..6), seed in 0u64..1000) {
        let x = simplex_project(&v).unwrap().into_values();
        let dist = |y: &[f64]| y.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let best = dist(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let mut y: Vec<f64> = (0..v.len()).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = y.iter().sum();
            y.iter_mut().for_each(|t| *t /= s);
            prop_assert!(dist(&y) >= best - 1e-12);
        }
    }
}

#[test]
fn projection_keeps_eigenvectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for d in [2, 4, 8] {
        let sigma = random_hermitian(d, &mut rng);
        let rho = project_to_physical(&sigma).unwrap();
        assert_density(&rho);
        // ρ is a function of σ, so they commute
        assert!(frob(&(&rho * &sigma), &(&sigma * &rho)) < 1e-10);
    }
}

#[test]
fn projection_is_unitarily_covariant_even_when_degenerate() {
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let d = 4;
    let spectrum = [0.7, 0.7, -0.2, -0.2];
    let u = random_unitary(d, &mut rng);
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, spectrum.iter().map(|&x| C64::new(x, 0.0))));
    let sigma = &u * &diag * u.adjoint();
    let rho = project_to_physical(&sigma).unwrap();
    assert_density(&rho);
    let expect = &u * project_to_physical(&diag).unwrap() * u.adjoint();
    assert!(frob(&rho, &expect) < 1e-10);
    let v = random_unitary(d, &mut rng);
    let rotated = project_to_physical(&(&v * &sigma * v.adjoint())).unwrap();
    assert!(frob(&rotated, &(&v * &rho * v.adjoint())) < 1e-10);
}

#[test]
fn projection_beats_random_density_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for n in [1, 2] {
        let sigma = random_hermitian(1 << n, &mut rng);
        let best = frob(&project_to_physical(&sigma).unwrap(), &sigma);
        for rank in 1..=(1 << n) {
            for _ in 0..500 {
                let cand = random_density(n, rank, &mut rng);
                assert!(frob(&cand, &sigma) >= best - 1e-12);
            }
        }
    }
}

#[test]
fn physical_states_are_fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(54);
    let rho = random_density(3, 3, &mut rng);
    assert!(frob(&project_to_physical(&rho).unwrap(), &rho) < 1e-10);
}

#[test]
fn hypothesis_state_reproduces_linear_estimates() {
    let mps = ghz(3).unwrap();
    for name in ["pauli6", "pauli4", "tetra"] {
        let ch = channel(name, None);
        let table = ch.factor_table();
        let e = sample(&mps, ch.povm(), 2_000, 55).unwrap();
        let sigma = hypothesis_state(&e, &ch).unwrap();
        assert!((sigma.matrix().trace().re - 1.0).abs() < 1e-12);
        for text in ["z0 z1", "x0 x1 x2", "y0 y1 x2", "z2"] {
            let obs: PauliObservable = text.parse().unwrap();
            let p = pauli_matrix(&obs, 3);
            let direct = (sigma.matrix() * p).trace().re;
            let linear = estimate(&e, &obs, &table, EstimatorMethod::Mean).unwrap().value;
            assert!((direct - linear).abs() < 1e-10, "{name} {text}: {direct} vs {linear}");
        }
    }
}

fn pauli_matrix(obs: &PauliObservable, n: usize) -> DMatrix<C64> {
    let mut m = DMatrix::from_element(1, 1, C64::new(obs.coefficient(), 0.0));
    for site in 0..n {
        let local = match obs.support().iter().find(|(s, _)| *s == site) {
            Some((_, a)) => {
                let p = a.matrix();
                DMatrix::from_fn(2, 2, |r, c| p[(r, c)])
            }
            None => DMatrix::identity(2, 2),
        };
        m = m.kronecker(&local);
    }
    m
}

#[test]
fn hypothesis_states_merge_by_record_count() {
    let mps = ghz(3).unwrap();
    let ch = channel("pauli6", None);
    let e = sample(&mps, ch.povm(), 900, 56).unwrap();
    let full = hypothesis_state(&e, &ch).unwrap();
    let merged = hypothesis_state(&e.slice(0..300), &ch)
        .unwrap()
        .merge(&hypothesis_state(&e.slice(300..900), &ch).unwrap())
        .unwrap();
    assert_eq!(merged.records(), 900);
    assert!(frob(merged.matrix(), full.matrix()) < 1e-12);
}

#[test]
fn projected_fidelity_never_exceeds_one() {
    let mps = ghz(4).unwrap();
    let target = mps.to_dense().unwrap().amplitudes().unwrap().clone();
    let ch = channel("pauli6", None);
    let mut raw_above = false;
    for seed in 0..20 {
        let e = sample(&mps, ch.povm(), 200, 570 + seed).unwrap();
        let sigma = hypothesis_state(&e, &ch).unwrap();
        let raw = fidelity_pure(sigma.matrix(), &target).unwrap();
        let proj = fidelity_pure(&project_to_physical(sigma.matrix()).unwrap(), &target).unwrap();
        raw_above |= raw > 1.0;
        assert!(proj <= 1.0 + 1e-12, "seed {seed}: {proj}");
        assert!(proj >= -1e-12);
    }
    assert!(raw_above, "small samples should push the raw estimate above one at least once");
}

#[test]
fn fidelity_of_exact_state_is_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(58);
    let psi = random_ket(3, &mut rng);
    let rho = &psi * psi.adjoint();
    assert!((fidelity_pure(&rho, &psi).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn matrix_files_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let m = random_hermitian(4, &mut rng);
    let mut buf = Vec::new();
    write_matrix(&m, &mut buf).unwrap();
    assert_eq!(read_matrix(&buf[..]).unwrap(), m);
}
