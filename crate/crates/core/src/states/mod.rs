//! Reference states and their exact expectation values.

mod hamiltonian;
mod mps;

pub use hamiltonian::{
    dense_spectrum, disordered_heisenberg, ground_state, lanczos_ground_state, GroundState,
    HeisenbergBond, SpinHamiltonian, MAX_ED_QUBITS,
};
pub(crate) use mps::transfer;
pub use mps::{ghz, product_state, MpsDocument, MpsState, SiteTensor, MAX_BOND_DIM};

use nalgebra::{DMatrix, DVector};

use crate::channel::NoiseModel;
use crate::error::{invalid, Error, Result};
use crate::pauli::{PauliAxis, PauliMasks, PauliObservable};
use crate::C64;

pub const MAX_PURE_QUBITS: usize = 14;
pub const MAX_MIXED_QUBITS: usize = 8;

/// Anything that can report exact Pauli-string expectation values.
pub trait QuantumState {
    fn num_qubits(&self) -> usize;

    /// `⟨P⟩` for the Pauli string on `support` (no coefficient).
    fn pauli_string_expectation(&self, support: &[(usize, PauliAxis)]) -> f64;
}

/// Exact `tr(ρ O)`.
pub fn exact_expectation<S: QuantumState + ?Sized>(state: &S, obs: &PauliObservable) -> Result<f64> {
    obs.check_support(state.num_qubits())?;
    Ok(obs.coefficient() * state.pauli_string_expectation(obs.support()))
}

/// `tr(E^{⊗n}(ρ) O)` for local noise `E`, computed in the Heisenberg picture.
pub fn exact_expectation_with_noise<S: QuantumState + ?Sized>(
    state: &S,
    obs: &PauliObservable,
    noise: &NoiseModel,
) -> Result<f64> {
    obs.check_support(state.num_qubits())?;
    let adj = noise.bloch().adjoint();
    let factors: Vec<_> = obs
        .support()
        .iter()
        .map(|&(site, axis)| {
            let mut e = [0.0; 4];
            e[axis.index() + 1] = 1.0;
            (site, adj.apply_coords(e))
        })
        .collect();
    Ok(obs.coefficient() * local_product_expectation(state, &factors))
}

/// `tr(ρ ⊗_i W_i)` where each `W_i = w0·I + w·σ` is given by its Bloch
/// coordinates and acts on a distinct site. Expands into Pauli strings.
pub fn local_product_expectation<S: QuantumState + ?Sized>(
    state: &S,
    factors: &[(usize, [f64; 4])],
) -> f64 {
    let k = factors.len();
    let mut total = 0.0;
    let mut support = Vec::with_capacity(k);
    // Enumerate the 4^k choices of (I, x, y, z) per factor.
    for code in 0..4usize.pow(k as u32) {
        support.clear();
        let mut weight = 1.0;
        let mut c = code;
        for &(site, w) in factors {
            let choice = c % 4;
            c /= 4;
            weight *= w[choice];
            if choice > 0 {
                support.push((site, PauliAxis::ALL[choice - 1]));
            }
        }
        if weight == 0.0 {
            continue;
        }
        total += if support.is_empty() {
            weight
        } else {
            support.sort_by_key(|&(s, _)| s);
            weight * state.pauli_string_expectation(&support)
        };
    }
    total
}

/// A dense pure state vector or density matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum DenseState {
    Pure { n: usize, amplitudes: DVector<C64> },
    Mixed { n: usize, matrix: DMatrix<C64> },
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(invalid(format!("dimension {dim} is not a power of two ≥ 2")));
    }
    Ok(dim.trailing_zeros() as usize)
}

impl DenseState {
    /// A pure state; the vector must have unit norm within 1e-12.
    pub fn pure(amplitudes: DVector<C64>) -> Result<Self> {
        let n = qubits_for_dim(amplitudes.len())?;
        if n > MAX_PURE_QUBITS {
            return Err(Error::TooLarge {
                what: "dense state vector",
                n,
                max: MAX_PURE_QUBITS,
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("state vector has norm {norm}, expected 1")));
        }
        Ok(DenseState::Pure { n, amplitudes })
    }

    /// A density matrix: Hermitian, unit trace, eigenvalues ≥ -1e-10.
    pub fn mixed(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("density matrix must be square"));
        }
        let n = qubits_for_dim(matrix.nrows())?;
        if n > MAX_MIXED_QUBITS {
            return Err(Error::TooLarge {
                what: "dense density matrix",
                n,
                max: MAX_MIXED_QUBITS,
            });
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-12 {
            return Err(invalid(format!("density matrix is not Hermitian (defect {herm:.3e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(invalid(format!("density matrix has trace {tr}, expected 1")));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(invalid(format!("density matrix has eigenvalue {min_eig:.3e} < 0")));
        }
        Ok(DenseState::Mixed { n, matrix })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let d = 1usize << n;
        Self::mixed(DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0))
    }

    /// Computational basis state `|bits⟩` (qubit 0 first).
    pub fn basis(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        let mut idx = 0usize;
        for &b in bits {
            idx = (idx << 1) | usize::from(b != 0);
        }
        let mut v = DVector::zeros(1 << n);
        v[idx] = C64::new(1.0, 0.0);
        Self::pure(v)
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match self {
            DenseState::Pure { amplitudes, .. } => Some(amplitudes),
            DenseState::Mixed { .. } => None,
        }
    }

    pub fn density_matrix(&self) -> Result<DMatrix<C64>> {
        match self {
            DenseState::Pure { n, amplitudes } => {
                if *n > MAX_MIXED_QUBITS {
                    return Err(Error::TooLarge {
                        what: "density matrix",
                        n: *n,
                        max: MAX_MIXED_QUBITS,
                    });
                }
                Ok(amplitudes * amplitudes.adjoint())
            }
            DenseState::Mixed { matrix, .. } => Ok(matrix.clone()),
        }
    }
}

impl QuantumState for DenseState {
    fn num_qubits(&self) -> usize {
        match self {
            DenseState::Pure { n, .. } | DenseState::Mixed { n, .. } => *n,
        }
    }

    fn pauli_string_expectation(&self, support: &[(usize, PauliAxis)]) -> f64 {
        let n = self.num_qubits();
        let m = PauliMasks::new(n, support);
        let mut acc = C64::new(0.0, 0.0);
        match self {
            DenseState::Pure { amplitudes, .. } => {
                for (b, psi) in amplitudes.iter().enumerate() {
                    acc += amplitudes[b ^ m.flip].conj() * m.phase(b) * psi;
                }
            }
            DenseState::Mixed { matrix, .. } => {
                for b in 0..matrix.nrows() {
                    acc += m.phase(b) * matrix[(b, b ^ m.flip)];
                }
            }
        }
        acc.re
    }
}

/// Local depolarizing noise `ρ → (1 - 4p/3)ρ + (4p/3)·I/2` on every qubit,
/// viewed as a transform on Pauli expectation values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalDepolarizing {
    p: f64,
}

impl LocalDepolarizing {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=0.75).contains(&p) {
            return Err(invalid(format!("depolarizing p = {p} outside [0, 3/4]")));
        }
        Ok(Self { p })
    }

    /// Shrink factor of each traceless single-site Pauli factor.
    pub fn factor(&self) -> f64 {
        1.0 - 4.0 * self.p / 3.0
    }

    /// Scale applied to a k-local Pauli correlator.
    pub fn scale(&self, k: usize) -> f64 {
        self.factor().powi(k as i32)
    }

    pub fn apply<S: QuantumState + ?Sized>(&self, state: &S, obs: &PauliObservable) -> Result<f64> {
        Ok(self.scale(obs.locality()) * exact_expectation(state, obs)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_and_mixed_agree() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v = DVector::from_vec(vec![
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.5),
            C64::new(0.5, 0.0),
        ]);
        let pure = DenseState::pure(v).unwrap();
        let mixed = DenseState::mixed(pure.density_matrix().unwrap()).unwrap();
        for support in [
            vec![(0, PauliAxis::Y)],
            vec![(0, PauliAxis::X), (1, PauliAxis::Z)],
            vec![(0, PauliAxis::Y), (1, PauliAxis::Y)],
            vec![(1, PauliAxis::X)],
        ] {
            let a = pure.pauli_string_expectation(&support);
            let b = mixed.pauli_string_expectation(&support);
            assert!((a - b).abs() < 1e-14, "{support:?}: {a} vs {b}");
        }
    }

    #[test]
    fn basis_state_expectations() {
        let s = DenseState::basis(&[1, 0]).unwrap();
        let z0 = PauliObservable::single(0, PauliAxis::Z);
        let z1 = PauliObservable::single(1, PauliAxis::Z);
        assert_eq!(exact_expectation(&s, &z0).unwrap(), -1.0);
        assert_eq!(exact_expectation(&s, &z1).unwrap(), 1.0);
        assert!(exact_expectation(&s, &PauliObservable::single(2, PauliAxis::Z)).is_err());
    }

    #[test]
    fn invalid_dense_states_are_rejected() {
        assert!(DenseState::pure(DVector::from_element(3, C64::new(0.5, 0.0))).is_err());
        assert!(DenseState::pure(DVector::from_element(4, C64::new(1.0, 0.0))).is_err());
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DenseState::mixed(m).is_err());
        assert!(DenseState::maximally_mixed(9).is_err());
    }

    #[test]
    fn local_depolarizing_scales() {
        assert_eq!(LocalDepolarizing::new(0.0).unwrap().scale(2), 1.0);
        assert!((LocalDepolarizing::new(0.3).unwrap().scale(2) - 0.36).abs() < 1e-15);
        assert_eq!(LocalDepolarizing::new(0.75).unwrap().scale(2), 0.0);
        assert!(LocalDepolarizing::new(0.8).is_err());
    }

    #[test]
    fn noisy_expectation_matches_depolarizing_scale() {
        let s = DenseState::basis(&[0, 0]).unwrap();
        let obs = PauliObservable::two_point(0, 1, PauliAxis::Z).unwrap();
        let noise = NoiseModel::depolarizing_p(0.3).unwrap();
        let v = exact_expectation_with_noise(&s, &obs, &noise).unwrap();
        assert!((v - 0.36).abs() < 1e-14);
    }
}
