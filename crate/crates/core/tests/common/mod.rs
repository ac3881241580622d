#![allow(dead_code)]

use icshadow::channel::measurement_channel;
use icshadow::pauli::from_bloch;
use icshadow::states::SiteTensor;
use icshadow::{builtin_povm, Mat2, MeasurementChannel, MpsState, NoiseModel, SnapshotRule, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const POVMS: [&str; 3] = ["pauli6", "pauli4", "tetra"];

pub fn channel(name: &str, noise: Option<&NoiseModel>) -> MeasurementChannel {
    measurement_channel(&builtin_povm(name).unwrap(), SnapshotRule::Limit, noise).unwrap()
}

/// Random single-qubit density matrix from a Bloch vector in the ball.
pub fn qubit_state(r: [f64; 3]) -> Mat2 {
    let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt().max(1.0);
    from_bloch([0.5, 0.5 * r[0] / norm, 0.5 * r[1] / norm, 0.5 * r[2] / norm])
}

pub fn random_density(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let d = 1 << n;
    let g = DMatrix::from_fn(d, rank, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    let rho = rho / tr;
    (&rho + rho.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_ket(n: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
    let v = DVector::from_fn(1 << n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

pub fn random_mps(n: usize, chi: usize, rng: &mut ChaCha8Rng) -> MpsState {
    let mut tensors: Vec<SiteTensor> = (0..n)
        .map(|i| {
            let l = if i == 0 { 1 } else { chi };
            let r = if i + 1 == n { 1 } else { chi };
            let data = (0..l * 2 * r)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            SiteTensor::new(l, r, data).unwrap()
        })
        .collect();
    let mut env = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for t in &tensors {
        env = (0..2).fold(DMatrix::zeros(t.right(), t.right()), |acc, s| {
            let a = t.matrix(s);
            acc + a.adjoint() * &env * a
        });
    }
    let scale = C64::new(env[(0, 0)].re.sqrt().recip(), 0.0);
    let first = &tensors[0];
    tensors[0] = SiteTensor::new(
        first.left(),
        first.right(),
        first.data().iter().map(|z| z * scale).collect(),
    )
    .unwrap();
    MpsState::new(tensors).unwrap()
}
