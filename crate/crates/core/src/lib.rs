//! Classical shadow tomography with informationally complete product POVMs.
//!
//! The pipeline is: pick a single-qubit [`Povm`](povm::Povm), build its
//! [`MeasurementChannel`](channel::MeasurementChannel) (optionally composed with
//! a characterized noise model), draw outcome records from a reference state
//! with the [`sampler`], and predict Pauli observables from the records with
//! the [`estimator`]. The [`fidelity`] module materializes small hypothesis
//! states and projects them back onto the set of density matrices.
//!
//! Qubit 0 is the leftmost tensor factor everywhere, so in a dense basis index
//! it is the most significant bit. Bloch coordinates are ordered
//! `(x0, r_x, r_y, r_z)` with `X = x0·I + r·σ`.

pub mod channel;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod fidelity;
pub mod pauli;
pub mod povm;
pub mod sampler;
pub mod states;

pub use channel::{
    bloch_of_map, invert, measurement_channel, BlochSuperoperator, FactorTable,
    MeasurementChannel, NoiseKind, NoiseModel,
};
pub use ensemble::{ShadowEnsemble, ShadowRecord};
pub use error::{Error, Result};
pub use estimator::{
    bound_constant, chebyshev_samples, estimate, max_error, required_samples, variance_bound,
    Estimate, EstimatorMethod, SampleBudget,
};
pub use fidelity::{
    fidelity_pure, hypothesis_state, project_to_physical, simplex_project, HypothesisState,
    SimplexPoint,
};
pub use pauli::{PauliAxis, PauliObservable};
pub use povm::{
    builtin_povm, noise_adjoint_povm, snapshot_distribution, validate_povm, Povm,
    SingleQubitOperator, SnapshotRule,
};
pub use sampler::{sample, sample_dense, sample_mps, sample_noisy, sample_noisy_state, Sampleable};
pub use states::{
    exact_expectation, ghz, ground_state, product_state, DenseState, GroundState,
    LocalDepolarizing, MpsState, SpinHamiltonian,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Single-qubit operator matrix.
pub type Mat2 = nalgebra::Matrix2<C64>;
/// Single-qubit ket.
pub type Ket2 = nalgebra::Vector2<C64>;
