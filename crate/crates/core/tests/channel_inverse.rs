mod common;

use common::{channel, qubit_state, POVMS};
use icshadow::channel::{bloch_of_map, measurement_channel};
use icshadow::pauli::{from_bloch, max_abs_diff};
use icshadow::{builtin_povm, Error, NoiseModel, Povm, SnapshotRule};
use proptest::prelude::*;

fn noises() -> Vec<Option<NoiseModel>> {
    vec![
        None,
        Some(NoiseModel::depolarizing(0.3).unwrap()),
        Some(NoiseModel::amplitude_damping(0.25).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn inverse_undoes_forward(r in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]) {
        let rho = qubit_state(r);
        for name in POVMS {
            for noise in noises() {
                let ch = channel(name, noise.as_ref());
                let back = ch.inverse().apply(&ch.forward().apply(&rho));
                prop_assert!(max_abs_diff(&back, &rho) < 1e-12);
            }
        }
    }

    #[test]
    fn forward_with_noise_is_the_composition(r in [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64], q in 0.0..1.0f64) {
        let rho = qubit_state(r);
        let noise = NoiseModel::depolarizing(q).unwrap();
        for name in POVMS {
            let noisy = channel(name, Some(&noise));
            let clean = channel(name, None);
            let lhs = noisy.forward().apply(&rho);
            let rhs = clean.forward().apply(&noise.apply(&rho));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }
}

#[test]
fn noise_channels_compose_in_bloch_form() {
    let a = NoiseModel::depolarizing(0.2).unwrap();
    let b = NoiseModel::amplitude_damping(0.4).unwrap();
    let direct = bloch_of_map(|x| a.apply(&b.apply(x)));
    assert!(direct.max_abs_diff(&a.bloch().compose(&b.bloch())) < 1e-14);
    // two depolarizing steps multiply their contractions
    let c = NoiseModel::depolarizing(0.5).unwrap();
    let both = a.bloch().compose(&c.bloch());
    let single = NoiseModel::depolarizing(1.0 - 0.8 * 0.5).unwrap().bloch();
    assert!(both.max_abs_diff(&single) < 1e-14);
}

#[test]
fn channels_preserve_trace() {
    for name in POVMS {
        for noise in noises() {
            let ch = channel(name, noise.as_ref());
            assert!(ch.forward().trace_preservation_defect() < 1e-14);
            assert!(ch.inverse().trace_preservation_defect() < 1e-12);
        }
    }
}

#[test]
fn unbiased_local_shadows() {
    // Σ_a tr(E(ρ) M_a) · M^{-1}(S_a) = ρ
    let rho = qubit_state([0.3, -0.5, 0.6]);
    for name in POVMS {
        for noise in noises() {
            let ch = channel(name, noise.as_ref());
            let effective = match &noise {
                Some(n) => n.apply(&rho),
                None => rho,
            };
            let probs = ch.povm().probabilities(&effective);
            let mut acc = icshadow::Mat2::zeros();
            for (a, p) in probs.iter().enumerate() {
                acc += ch.local_shadow(a) * icshadow::C64::new(*p, 0.0);
            }
            assert!(max_abs_diff(&acc, &rho) < 1e-12, "{name} {noise:?}");
        }
    }
}

#[test]
fn computational_basis_measurement_is_not_invertible() {
    let z = Povm::from_elements("z", vec![from_bloch([0.5, 0.0, 0.0, 0.5]), from_bloch([0.5, 0.0, 0.0, -0.5])]);
    let err = measurement_channel(&z, SnapshotRule::Limit, None).unwrap_err();
    assert!(matches!(err, Error::InformationallyIncomplete { .. }), "{err}");
}

#[test]
fn full_depolarizing_noise_is_rejected() {
    let noise = NoiseModel::depolarizing(1.0).unwrap();
    let err = measurement_channel(&builtin_povm("pauli6").unwrap(), SnapshotRule::Limit, Some(&noise)).unwrap_err();
    assert!(matches!(err, Error::InformationallyIncomplete { .. }), "{err}");
}

#[test]
fn non_trace_preserving_noise_is_rejected() {
    let half = icshadow::pauli::identity2() * icshadow::C64::new(0.5, 0.0);
    let noise = NoiseModel::from_kraus(vec![half]);
    let err = measurement_channel(&builtin_povm("tetra").unwrap(), SnapshotRule::Limit, Some(&noise)).unwrap_err();
    assert!(matches!(err, Error::NotTracePreserving(_)));
}
