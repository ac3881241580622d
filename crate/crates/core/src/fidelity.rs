//! Dense hypothesis states, projection onto density matrices, and fidelity
//! with pure targets.
//!
//! Matrix files: little-endian `u64` dimension `D`, then `D × D` entries in
//! row-major order, each as `f64` real part followed by `f64` imaginary part.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::channel::MeasurementChannel;
use crate::ensemble::ShadowEnsemble;
use crate::error::{invalid, Error, Result};
use crate::C64;

/// Largest qubit count for which hypothesis states are materialized.
pub const MAX_HYPOTHESIS_QUBITS: usize = 8;

/// Average of the records' classical shadows, `σ = (1/N) Σ_j ⊗_i M⁻¹(S_{a_i^{(j)}})`.
/// Hermitian with unit trace, but in general not positive.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisState {
    n: usize,
    records: usize,
    matrix: DMatrix<C64>,
}

impl HypothesisState {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// Record-weighted average of two hypothesis states built from disjoint
    /// records of the same measurement.
    pub fn merge(&self, other: &HypothesisState) -> Result<HypothesisState> {
        if self.n != other.n {
            return Err(Error::Mismatch(format!(
                "hypothesis states on {} and {} qubits",
                self.n, other.n
            )));
        }
        let total = self.records + other.records;
        if total == 0 {
            return Ok(self.clone());
        }
        let wa = C64::new(self.records as f64 / total as f64, 0.0);
        let wb = C64::new(other.records as f64 / total as f64, 0.0);
        Ok(HypothesisState {
            n: self.n,
            records: total,
            matrix: &self.matrix * wa + &other.matrix * wb,
        })
    }
}

/// Builds `σ` from the records. Records are sorted and grouped by prefix so
/// each distinct prefix contributes one Kronecker product.
pub fn hypothesis_state(ensemble: &ShadowEnsemble, channel: &MeasurementChannel) -> Result<HypothesisState> {
    let n = ensemble.num_qubits();
    if n > MAX_HYPOTHESIS_QUBITS {
        return Err(Error::TooLarge {
            what: "dense hypothesis state (estimate observables from the factor table instead)",
            n,
            max: MAX_HYPOTHESIS_QUBITS,
        });
    }
    let noise = channel.noise().map(|m| m.descriptor());
    if ensemble.povm() != channel.povm().name() || ensemble.noise() != noise.as_deref() {
        return Err(Error::Mismatch(format!(
            "records from ({}, noise={}) do not match the channel ({}, noise={})",
            ensemble.povm(),
            ensemble.noise().unwrap_or("none"),
            channel.povm().name(),
            noise.as_deref().unwrap_or("none"),
        )));
    }
    if ensemble.is_empty() {
        return Err(invalid("cannot build a hypothesis state from zero records"));
    }
    let shadows: Vec<DMatrix<C64>> = (0..ensemble.k())
        .map(|a| {
            let m = channel.local_shadow(a);
            DMatrix::from_fn(2, 2, |r, c| m[(r, c)])
        })
        .collect();
    let mut recs: Vec<&[u8]> = ensemble.records().map(|r| r.outcomes()).collect();
    recs.sort_unstable();
    let sum = accumulate(&recs, 0, &shadows);
    let records = recs.len();
    Ok(HypothesisState {
        n,
        records,
        matrix: sum / C64::new(records as f64, 0.0),
    })
}

// Σ over `recs` (sorted, sharing the first `depth` outcomes) of the tensor
// product of their remaining local shadows.
fn accumulate(recs: &[&[u8]], depth: usize, shadows: &[DMatrix<C64>]) -> DMatrix<C64> {
    let n = recs[0].len();
    if depth == n {
        return DMatrix::from_element(1, 1, C64::new(recs.len() as f64, 0.0));
    }
    let dim = 1usize << (n - depth);
    let mut out = DMatrix::zeros(dim, dim);
    let mut start = 0;
    while start < recs.len() {
        let a = recs[start][depth];
        let end = start + recs[start..].partition_point(|r| r[depth] == a);
        let rest = accumulate(&recs[start..end], depth + 1, shadows);
        out += shadows[a as usize].kronecker(&rest);
        start = end;
    }
    out
}

/// A probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    values: Vec<f64>,
}

impl SimplexPoint {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sort-and-threshold
/// method.
pub fn simplex_project(values: &[f64]) -> Result<SimplexPoint> {
    if values.is_empty() {
        return Err(invalid("cannot project an empty vector"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("simplex projection needs finite entries"));
    }
    let mut u = values.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (1.0 - cum) / (j + 1) as f64;
        if uj + t > 0.0 {
            tau = t;
        }
    }
    Ok(SimplexPoint {
        values: values.iter().map(|v| (v + tau).max(0.0)).collect(),
    })
}

/// Closest density matrix to `sigma` in Frobenius norm: eigenvalues projected
/// onto the simplex, eigenvectors kept.
pub fn project_to_physical(sigma: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if !sigma.is_square() {
        return Err(invalid("matrix must be square"));
    }
    let herm = (sigma - sigma.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-8 {
        return Err(invalid(format!("matrix is not Hermitian (defect {herm:.3e})")));
    }
    let eig = nalgebra::SymmetricEigen::try_new(sigma.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
    let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let p = simplex_project(&lambda)?;
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        p.values.len(),
        p.values.iter().map(|&x| C64::new(x, 0.0)),
    ));
    Ok(v * d * v.adjoint())
}

/// `⟨ψ|σ|ψ⟩` (real part).
pub fn fidelity_pure(sigma: &DMatrix<C64>, target: &DVector<C64>) -> Result<f64> {
    if sigma.nrows() != target.len() || sigma.ncols() != target.len() {
        return Err(Error::Mismatch(format!(
            "{}×{} matrix against a vector of length {}",
            sigma.nrows(),
            sigma.ncols(),
            target.len()
        )));
    }
    Ok((target.adjoint() * sigma * target)[(0, 0)].re)
}

pub fn write_matrix(m: &DMatrix<C64>, mut w: impl Write) -> Result<()> {
    if !m.is_square() {
        return Err(invalid("only square matrices are written"));
    }
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_all(&m[(r, c)].re.to_le_bytes())?;
            w.write_all(&m[(r, c)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix(mut r: impl Read) -> Result<DMatrix<C64>> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let d = u64::from_le_bytes(word) as usize;
    if d == 0 || d > 1 << 14 {
        return Err(Error::Format(format!("implausible matrix dimension {d}")));
    }
    let mut bytes = vec![0u8; d * d * 16];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated matrix data".into()))?;
    let f = |i: usize| f64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
    Ok(DMatrix::from_fn(d, d, |row, col| {
        let i = (row * d + col) * 2;
        C64::new(f(i), f(i + 1))
    }))
}
