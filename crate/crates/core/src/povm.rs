//! Single-qubit POVMs, their validation, and snapshot-state selection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::NoiseModel;
use crate::error::{invalid, Error, Result};
use crate::pauli::{bloch_coords, from_bloch, identity2, ket_along, max_abs_diff, projector};
use crate::{Ket2, Mat2, C64};

/// Eigenvalues closer than this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;
/// Tolerance for Hermiticity and completeness.
pub const POVM_TOL: f64 = 1e-12;

/// A 2×2 operator; Hermitian ones decompose exactly as `x0·I + r·σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitOperator {
    entries: Mat2,
}

impl SingleQubitOperator {
    pub fn new(entries: Mat2) -> Self {
        Self { entries }
    }

    pub fn from_bloch(coords: [f64; 4]) -> Self {
        Self::new(from_bloch(coords))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.entries
    }

    /// `(x0, r_x, r_y, r_z)` of the Hermitian part.
    pub fn bloch(&self) -> [f64; 4] {
        bloch_coords(&self.entries)
    }

    /// Max absolute deviation from the conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs_diff(&self.entries, &self.entries.adjoint())
    }

    /// Spectral decomposition of the Hermitian part, largest eigenvalue first.
    pub fn eigen(&self) -> Eigen2 {
        Eigen2::from_bloch(self.bloch())
    }
}

/// Eigenpairs of a Hermitian 2×2 operator in descending eigenvalue order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen2 {
    pub values: [f64; 2],
    pub vectors: [Ket2; 2],
}

impl Eigen2 {
    /// Closed form: eigenvalues `x0 ± |r|` with eigenvectors along `±r̂`. When
    /// `|r|` is below [`DEGENERACY_TOL`] the computational basis is used.
    fn from_bloch(c: [f64; 4]) -> Self {
        let [x0, rx, ry, rz] = c;
        let len = (rx * rx + ry * ry + rz * rz).sqrt();
        if len < DEGENERACY_TOL {
            return Eigen2 {
                values: [x0 + len, x0 - len],
                vectors: [
                    Ket2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
                    Ket2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
                ],
            };
        }
        let n = [rx / len, ry / len, rz / len];
        Eigen2 {
            values: [x0 + len, x0 - len],
            vectors: [ket_along(n), ket_along([-n[0], -n[1], -n[2]])],
        }
    }

    fn is_degenerate(&self) -> bool {
        (self.values[0] - self.values[1]).abs() < DEGENERACY_TOL
    }
}

/// How a snapshot state is picked once outcome `a` has been observed.
///
/// `Power(m)` draws eigenvector `i` of `M_a` with probability `∝ λ_i^m`;
/// `Limit` is the `m → ∞` rule that always returns a top eigenvector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotRule {
    #[default]
    Limit,
    Power(f64),
}

/// A single-qubit POVM with its precomputed spectral data.
#[derive(Clone, Debug)]
pub struct Povm {
    name: String,
    elements: Vec<SingleQubitOperator>,
    bloch: Vec<[f64; 4]>,
    eigen: Vec<Eigen2>,
    sqrt: Vec<Mat2>,
    snapshots: Vec<Ket2>,
}

impl PartialEq for Povm {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.elements == other.elements
            && self.snapshots == other.snapshots
    }
}

impl Povm {
    /// Builds a POVM from its elements without validating it; use
    /// [`validate_povm`] or [`Povm::validated`] to check the invariants.
    /// The snapshot state of each element is its top eigenvector.
    pub fn from_elements(name: impl Into<String>, elements: Vec<Mat2>) -> Self {
        let elements: Vec<_> = elements.into_iter().map(SingleQubitOperator::new).collect();
        let eigen: Vec<_> = elements.iter().map(|e| e.eigen()).collect();
        let snapshots = eigen.iter().map(|e| e.vectors[0]).collect();
        Self::assemble(name.into(), elements, eigen, snapshots)
    }

    /// Like [`Povm::from_elements`] but rejects anything that fails validation.
    pub fn validated(name: impl Into<String>, elements: Vec<Mat2>) -> Result<Self> {
        let povm = Self::from_elements(name, elements);
        povm.ensure_valid()?;
        Ok(povm)
    }

    fn assemble(
        name: String,
        elements: Vec<SingleQubitOperator>,
        eigen: Vec<Eigen2>,
        snapshots: Vec<Ket2>,
    ) -> Self {
        let bloch = elements.iter().map(|e| e.bloch()).collect();
        let sqrt = eigen
            .iter()
            .map(|e| {
                let mut acc = Mat2::zeros();
                for (&l, v) in e.values.iter().zip(&e.vectors) {
                    acc += projector(v) * C64::new(l.max(0.0).sqrt(), 0.0);
                }
                acc
            })
            .collect();
        Self {
            name,
            elements,
            bloch,
            eigen,
            sqrt,
            snapshots,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of outcomes.
    pub fn k(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[SingleQubitOperator] {
        &self.elements
    }

    pub fn element(&self, a: usize) -> &Mat2 {
        self.elements[a].matrix()
    }

    /// Bloch coordinates of every element.
    pub fn bloch(&self) -> &[[f64; 4]] {
        &self.bloch
    }

    pub fn eigen(&self, a: usize) -> &Eigen2 {
        &self.eigen[a]
    }

    /// `√M_a`, a Kraus operator with `K†K = M_a`.
    pub fn sqrt_element(&self, a: usize) -> &Mat2 {
        &self.sqrt[a]
    }

    pub fn snapshots(&self) -> &[Ket2] {
        &self.snapshots
    }

    /// Born probabilities `tr(ρ M_a)` for a single-qubit operator `rho`.
    pub fn probabilities(&self, rho: &Mat2) -> Vec<f64> {
        let r = bloch_coords(rho);
        self.bloch
            .iter()
            .map(|m| 2.0 * (r[0] * m[0] + r[1] * m[1] + r[2] * m[2] + r[3] * m[3]))
            .collect()
    }

    fn ensure_valid(&self) -> Result<()> {
        match validate_povm(self).first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidPovm(v.to_string())),
        }
    }

    /// Serializes to the JSON interchange document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PovmDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: PovmDocument = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// JSON form of a POVM. Matrices are row-major lists of `[re, im]` pairs.
#[derive(Debug, Serialize, Deserialize)]
pub struct PovmDocument {
    pub name: String,
    pub k: usize,
    pub elements: Vec<[[f64; 2]; 4]>,
    pub snapshots: Vec<[[f64; 2]; 2]>,
}

impl From<&Povm> for PovmDocument {
    fn from(p: &Povm) -> Self {
        let c = |z: C64| [z.re, z.im];
        PovmDocument {
            name: p.name.clone(),
            k: p.k(),
            elements: p
                .elements
                .iter()
                .map(|e| {
                    let m = e.matrix();
                    [c(m[(0, 0)]), c(m[(0, 1)]), c(m[(1, 0)]), c(m[(1, 1)])]
                })
                .collect(),
            snapshots: p.snapshots.iter().map(|v| [c(v[0]), c(v[1])]).collect(),
        }
    }
}

impl TryFrom<PovmDocument> for Povm {
    type Error = Error;

    fn try_from(doc: PovmDocument) -> Result<Self> {
        if doc.k != doc.elements.len() || doc.k != doc.snapshots.len() {
            return Err(Error::Format(format!(
                "POVM document declares k = {} but has {} elements and {} snapshots",
                doc.k,
                doc.elements.len(),
                doc.snapshots.len()
            )));
        }
        let c = |z: [f64; 2]| C64::new(z[0], z[1]);
        let elements: Vec<_> = doc
            .elements
            .iter()
            .map(|e| SingleQubitOperator::new(Mat2::new(c(e[0]), c(e[1]), c(e[2]), c(e[3]))))
            .collect();
        let eigen = elements.iter().map(|e| e.eigen()).collect();
        let snapshots = doc
            .snapshots
            .iter()
            .map(|s| Ket2::new(c(s[0]), c(s[1])))
            .collect();
        Ok(Self::assemble(doc.name, elements, eigen, snapshots))
    }
}

/// Which POVM invariant a [`Violation`] refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Invariant {
    TooFewElements,
    Hermiticity,
    Completeness,
    Positivity,
    ZeroElement,
    SnapshotNotTopEigenvector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub invariant: Invariant,
    pub element: Option<usize>,
    pub magnitude: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.invariant)?;
        if let Some(a) = self.element {
            write!(f, " (element {a})")?;
        }
        write!(f, ": magnitude {:.3e}", self.magnitude)
    }
}

/// Checks every POVM invariant and reports each violation with its size.
/// An empty report means the POVM is valid.
pub fn validate_povm(povm: &Povm) -> Vec<Violation> {
    let mut report = Vec::new();
    let k = povm.k();
    if k < 2 {
        report.push(Violation {
            invariant: Invariant::TooFewElements,
            element: None,
            magnitude: (2 - k) as f64,
        });
    }

    let mut sum = Mat2::zeros();
    for (a, e) in povm.elements.iter().enumerate() {
        sum += e.matrix();
        let herm = e.hermiticity_defect();
        if herm > POVM_TOL {
            report.push(Violation {
                invariant: Invariant::Hermiticity,
                element: Some(a),
                magnitude: herm,
            });
        }
        let eig = &povm.eigen[a];
        if eig.values[1] < -POVM_TOL {
            report.push(Violation {
                invariant: Invariant::Positivity,
                element: Some(a),
                magnitude: -eig.values[1],
            });
        }
        let norm = e.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if norm <= POVM_TOL {
            report.push(Violation {
                invariant: Invariant::ZeroElement,
                element: Some(a),
                magnitude: norm,
            });
            continue;
        }
        // ⟨ψ|M|ψ⟩ must reach the top eigenvalue for a unit snapshot.
        let psi = &povm.snapshots[a];
        let rayleigh = (psi.adjoint() * e.matrix() * psi)[(0, 0)].re;
        let gap = (eig.values[0] - rayleigh).abs() + (psi.norm() - 1.0).abs();
        if gap > 1e-10 {
            report.push(Violation {
                invariant: Invariant::SnapshotNotTopEigenvector,
                element: Some(a),
                magnitude: gap,
            });
        }
    }

    let completeness = max_abs_diff(&sum, &identity2());
    if completeness > POVM_TOL {
        report.push(Violation {
            invariant: Invariant::Completeness,
            element: None,
            magnitude: completeness,
        });
    }
    report
}

fn ket(a: f64, b: C64) -> Ket2 {
    Ket2::new(C64::new(a, 0.0), b)
}

/// One of the built-in POVMs: `pauli6`, `pauli4` or `tetra`.
///
/// Pauli-6 outcomes are ordered `|0⟩, |1⟩, |+⟩, |−⟩, |l⟩, |r⟩` where `|l⟩` is
/// the `+1` eigenvector of `σ_y`. Pauli-4 keeps `|0⟩, |+⟩, |l⟩` and lumps the
/// remaining three into a rank-2 element.
pub fn builtin_povm(name: &str) -> Result<Povm> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = ket(1.0, C64::new(0.0, 0.0));
    let one = Ket2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let plus = ket(h, C64::new(h, 0.0));
    let minus = ket(h, C64::new(-h, 0.0));
    let left = ket(h, C64::new(0.0, h));
    let right = ket(h, C64::new(0.0, -h));
    let third = C64::new(1.0 / 3.0, 0.0);
    let elements = match name {
        "pauli6" => [zero, one, plus, minus, left, right]
            .iter()
            .map(|v| projector(v) * third)
            .collect(),
        "pauli4" => vec![
            projector(&zero) * third,
            projector(&plus) * third,
            projector(&left) * third,
            (projector(&one) + projector(&minus) + projector(&right)) * third,
        ],
        "tetra" => {
            let s2 = std::f64::consts::SQRT_2;
            let dirs = [
                [0.0, 0.0, 1.0],
                [2.0 * s2 / 3.0, 0.0, -1.0 / 3.0],
                [-s2 / 3.0, (2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
                [-s2 / 3.0, -(2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
            ];
            dirs.iter()
                .map(|s| from_bloch([0.25, s[0] / 4.0, s[1] / 4.0, s[2] / 4.0]))
                .collect()
        }
        other => return Err(Error::UnknownPovm(other.to_string())),
    };
    Ok(Povm::from_elements(name, elements))
}

/// Eigenvectors of `M_outcome` with the probability of choosing each as the
/// snapshot under `rule`. Zero-probability eigenvectors are omitted.
pub fn snapshot_distribution(
    povm: &Povm,
    outcome: usize,
    rule: SnapshotRule,
) -> Result<Vec<(Ket2, f64)>> {
    if outcome >= povm.k() {
        return Err(invalid(format!(
            "outcome {outcome} out of range for a {}-outcome POVM",
            povm.k()
        )));
    }
    let eig = &povm.eigen[outcome];
    if eig.values[0] <= POVM_TOL {
        return Err(Error::ZeroElement(outcome));
    }
    let out = match rule {
        SnapshotRule::Limit => {
            if eig.is_degenerate() {
                vec![(eig.vectors[0], 0.5), (eig.vectors[1], 0.5)]
            } else {
                vec![(povm.snapshots[outcome], 1.0)]
            }
        }
        SnapshotRule::Power(m) => {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!("snapshot exponent must be positive, got {m}")));
            }
            let weights = eig.values.map(|l| l.max(0.0).powf(m));
            let total: f64 = weights.iter().sum();
            eig.vectors
                .iter()
                .zip(weights)
                .filter(|(_, w)| *w > 0.0)
                .map(|(v, w)| (*v, w / total))
                .collect()
        }
    };
    Ok(out)
}

/// Bloch coordinates of the averaged snapshot `Σ_i p(i|a) |i,a⟩⟨i,a|`.
pub(crate) fn snapshot_operator(povm: &Povm, outcome: usize, rule: SnapshotRule) -> Result<[f64; 4]> {
    let mut acc = Mat2::zeros();
    for (v, p) in snapshot_distribution(povm, outcome, rule)? {
        acc += projector(&v) * C64::new(p, 0.0);
    }
    Ok(bloch_coords(&acc))
}

/// Heisenberg-picture POVM `{Σ_j K_j† M_a K_j}`: its outcome law on `ρ`
/// equals the original POVM's law on `E(ρ)`.
pub fn noise_adjoint_povm(povm: &Povm, noise: &NoiseModel) -> Result<Povm> {
    noise.check_trace_preserving()?;
    let elements = povm
        .elements
        .iter()
        .map(|e| {
            noise
                .kraus()
                .iter()
                .map(|k| k.adjoint() * e.matrix() * k)
                .sum()
        })
        .collect();
    Ok(Povm::from_elements(
        format!("{}+{}", povm.name, noise.descriptor()),
        elements,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliAxis;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn builtins_are_valid() {
        for name in ["pauli6", "pauli4", "tetra"] {
            let p = builtin_povm(name).unwrap();
            assert!(validate_povm(&p).is_empty(), "{name}: {:?}", validate_povm(&p));
        }
        assert!(matches!(builtin_povm("sic"), Err(Error::UnknownPovm(_))));
    }

    #[test]
    fn pauli6_completeness_to_machine_precision() {
        let p = builtin_povm("pauli6").unwrap();
        let sum: Mat2 = p.elements().iter().map(|e| *e.matrix()).sum();
        assert!(max_abs_diff(&sum, &identity2()) <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn half_identities_are_a_povm() {
        let half = identity2() * C64::new(0.5, 0.0);
        let p = Povm::from_elements("halves", vec![half, half]);
        assert!(validate_povm(&p).is_empty());
    }

    #[test]
    fn doubled_identity_reports_completeness_of_one() {
        let p = Povm::from_elements("bad", vec![identity2(), identity2()]);
        let report = validate_povm(&p);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].invariant, Invariant::Completeness);
        assert!(close(report[0].magnitude, 1.0, 1e-15));
        assert!(Povm::validated("bad", vec![identity2(), identity2()]).is_err());
    }

    #[test]
    fn negative_and_zero_elements_are_reported() {
        let z = PauliAxis::Z.matrix();
        let p = Povm::from_elements("neg", vec![z, identity2() - z, Mat2::zeros()]);
        let kinds: Vec<_> = validate_povm(&p).iter().map(|v| v.invariant).collect();
        assert!(kinds.contains(&Invariant::Positivity));
        assert!(kinds.contains(&Invariant::ZeroElement));
    }

    #[test]
    fn tetra_directions() {
        let p = builtin_povm("tetra").unwrap();
        let b = p.bloch();
        assert!(close(b[0][3], 0.25, 1e-15));
        assert!(close(b[1][1], 2.0 * 2f64.sqrt() / 12.0, 1e-15));
        assert!(close(b[1][3], -1.0 / 12.0, 1e-15));
        for e in b {
            assert!(close(e[0], 0.25, 1e-15));
            let r = (e[1] * e[1] + e[2] * e[2] + e[3] * e[3]).sqrt();
            assert!(close(r, 0.25, 1e-15));
        }
    }

    #[test]
    fn pauli4_rank_two_element() {
        let p = builtin_povm("pauli4").unwrap();
        let e = p.eigen(3);
        let s = 1.0 / 3f64.sqrt();
        assert!(close(e.values[0], 0.5 * (1.0 + s), 1e-15));
        assert!(close(e.values[1], 0.5 * (1.0 - s), 1e-15));
        // |t⟩ points along -(1,1,1)/√3 on the Bloch sphere.
        let t = projector(&p.snapshots()[3]);
        let c = bloch_coords(&t);
        for i in 1..4 {
            assert!(close(c[i], -0.5 * s, 1e-15));
        }
    }

    #[test]
    fn limit_rule_snapshots() {
        let p4 = builtin_povm("pauli4").unwrap();
        let d = snapshot_distribution(&p4, 3, SnapshotRule::Limit).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].1, 1.0);
        assert_eq!(d[0].0, p4.snapshots()[3]);

        let p6 = builtin_povm("pauli6").unwrap();
        let d = snapshot_distribution(&p6, 0, SnapshotRule::Limit).unwrap();
        assert_eq!(d, vec![(Ket2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), 1.0)]);
        assert!(snapshot_distribution(&p6, 6, SnapshotRule::Limit).is_err());
    }

    #[test]
    fn power_rule_on_pauli4() {
        // f(λ) = λ on λ = ½(1 ± 1/√3) normalizes to the same numbers since they sum to 1.
        let p4 = builtin_povm("pauli4").unwrap();
        let d = snapshot_distribution(&p4, 3, SnapshotRule::Power(1.0)).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!(close(d[0].1, (1.0 + s) / 2.0, 1e-15));
        assert!(close(d[1].1, (1.0 - s) / 2.0, 1e-15));
    }

    #[test]
    fn degenerate_top_eigenspace_is_split_evenly() {
        let half = identity2() * C64::new(0.5, 0.0);
        let p = Povm::from_elements("halves", vec![half, half]);
        let d = snapshot_distribution(&p, 0, SnapshotRule::Limit).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].1, 0.5);
        assert_eq!(d[1].1, 0.5);
    }

    #[test]
    fn zero_element_has_no_distribution() {
        let p = Povm::from_elements("z", vec![identity2(), Mat2::zeros()]);
        assert!(matches!(
            snapshot_distribution(&p, 1, SnapshotRule::Limit),
            Err(Error::ZeroElement(1))
        ));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for name in ["pauli6", "pauli4", "tetra"] {
            let p = builtin_povm(name).unwrap();
            let back = Povm::from_json(&p.to_json().unwrap()).unwrap();
            assert_eq!(back, p);
            assert_eq!(back.bloch(), p.bloch());
        }
    }
}
