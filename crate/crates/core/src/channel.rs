//! Bloch-superoperator algebra for single-qubit maps and the synthetic
//! measurement channel of a POVM.
//!
//! A linear map `E` on 2×2 operators is stored as the real 4×4 matrix `T̂`
//! acting on coordinates `(x0, r)` of `X = x0·I + r·σ`, so
//! `T̂_ij = ½ tr(σ_i E(σ_j))` with `σ_0 = I`. For trace-preserving maps the
//! first row is `(1, 0, 0, 0)`, the first column below it is the displacement
//! `c` and the lower 3×3 block is the affine part `T`.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pauli::{bloch_coords, from_bloch, identity2, max_abs_diff, PauliAxis};
use crate::povm::{noise_adjoint_povm, snapshot_operator, validate_povm, Povm, SingleQubitOperator, SnapshotRule};
use crate::{Mat2, C64};

/// Smallest singular value below which a channel counts as non-invertible.
pub const SINGULAR_TOL: f64 = 1e-8;

/// Real 4×4 representation of a single-qubit linear map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochSuperoperator {
    matrix: Matrix4<f64>,
}

impl BlochSuperoperator {
    pub fn identity() -> Self {
        Self::from_matrix(Matrix4::identity())
    }

    pub fn from_matrix(matrix: Matrix4<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &BlochSuperoperator) -> BlochSuperoperator {
        Self::from_matrix(self.matrix * other.matrix)
    }

    /// Adjoint with respect to the Hilbert-Schmidt inner product. All four
    /// basis operators have the same norm, so this is the transpose.
    pub fn adjoint(&self) -> BlochSuperoperator {
        Self::from_matrix(self.matrix.transpose())
    }

    pub fn apply_coords(&self, c: [f64; 4]) -> [f64; 4] {
        let v = self.matrix * nalgebra::Vector4::from(c);
        [v[0], v[1], v[2], v[3]]
    }

    /// Action on the Hermitian part of `x`.
    pub fn apply(&self, x: &Mat2) -> Mat2 {
        from_bloch(self.apply_coords(bloch_coords(x)))
    }

    /// Max deviation of the first row from `(1, 0, 0, 0)`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let row = self.matrix.row(0);
        (row[0] - 1.0)
            .abs()
            .max(row[1].abs())
            .max(row[2].abs())
            .max(row[3].abs())
    }

    /// Max absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &BlochSuperoperator) -> f64 {
        (self.matrix - other.matrix).amax()
    }
}

/// Bloch superoperator of the map whose action on a 2×2 matrix is `action`.
/// Only the outputs on `I, σ_x, σ_y, σ_z` are used.
pub fn bloch_of_map(action: impl Fn(&Mat2) -> Mat2) -> BlochSuperoperator {
    let basis = [
        identity2(),
        PauliAxis::X.matrix(),
        PauliAxis::Y.matrix(),
        PauliAxis::Z.matrix(),
    ];
    let mut m = Matrix4::zeros();
    for (j, b) in basis.iter().enumerate() {
        let c = bloch_coords(&action(b));
        for i in 0..4 {
            m[(i, j)] = c[i];
        }
    }
    BlochSuperoperator::from_matrix(m)
}

const COMPONENTS: [&str; 4] = ["identity", "x", "y", "z"];

/// Inverse superoperator. Fails when the smallest singular value is below
/// [`SINGULAR_TOL`], naming the Bloch component the map annihilates.
pub fn invert(superop: &BlochSuperoperator) -> Result<BlochSuperoperator> {
    let svd = superop.matrix.svd(false, true);
    let (idx, &sigma_min) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("4 singular values");
    if sigma_min < SINGULAR_TOL {
        let v_t = svd.v_t.expect("requested V^T");
        let null = v_t.row(idx);
        let dominant = (0..4)
            .max_by(|&a, &b| null[a].abs().total_cmp(&null[b].abs()))
            .unwrap_or(0);
        return Err(Error::InformationallyIncomplete {
            null_direction: COMPONENTS[dominant],
            sigma_min,
        });
    }
    superop
        .matrix
        .try_inverse()
        .map(BlochSuperoperator::from_matrix)
        .ok_or_else(|| Error::Numerical("4x4 inversion failed".into()))
}

/// The kind of a characterized single-qubit noise channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// `E(ρ) = (1 - q)ρ + q·tr(ρ)·I/2`.
    Depolarizing { strength: f64 },
    /// Kraus operators `diag(1, √(1-γ))` and `√γ|0⟩⟨1|`.
    AmplitudeDamping { gamma: f64 },
    /// Arbitrary Kraus operators, row-major `[re, im]` entries.
    Kraus { operators: Vec<[[f64; 2]; 4]> },
}

/// A single-qubit noise channel in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    kraus: Vec<Mat2>,
}

impl NoiseModel {
    /// Depolarizing channel with contraction `1 - q`; `q ∈ [0, 4/3]` keeps it
    /// completely positive.
    pub fn depolarizing(q: f64) -> Result<Self> {
        if !(0.0..=4.0 / 3.0).contains(&q) {
            return Err(invalid(format!("depolarizing strength {q} outside [0, 4/3]")));
        }
        let id = C64::new((1.0 - 0.75 * q).sqrt(), 0.0);
        let pauli = C64::new((q / 4.0).sqrt(), 0.0);
        let mut kraus = vec![identity2() * id];
        kraus.extend(PauliAxis::ALL.iter().map(|a| a.matrix() * pauli));
        Ok(Self {
            kind: NoiseKind::Depolarizing { strength: q },
            kraus,
        })
    }

    /// Local depolarizing noise written as `ρ' = (1 - 4p/3)ρ + (4p/3)·I/2`,
    /// the parametrization used for the noisy GHZ experiments (`p ≤ 3/4`).
    pub fn depolarizing_p(p: f64) -> Result<Self> {
        if !(0.0..=0.75).contains(&p) {
            return Err(invalid(format!("depolarizing p = {p} outside [0, 3/4]")));
        }
        Self::depolarizing(4.0 * p / 3.0)
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(invalid(format!("damping parameter {gamma} outside [0, 1]")));
        }
        let z = C64::new(0.0, 0.0);
        let k0 = Mat2::new(C64::new(1.0, 0.0), z, z, C64::new((1.0 - gamma).sqrt(), 0.0));
        let k1 = Mat2::new(z, C64::new(gamma.sqrt(), 0.0), z, z);
        Ok(Self {
            kind: NoiseKind::AmplitudeDamping { gamma },
            kraus: vec![k0, k1],
        })
    }

    /// Arbitrary Kraus operators. Trace preservation is checked where the
    /// channel is used, not here.
    pub fn from_kraus(kraus: Vec<Mat2>) -> Self {
        let operators = kraus
            .iter()
            .map(|m| {
                let c = |z: C64| [z.re, z.im];
                [c(m[(0, 0)]), c(m[(0, 1)]), c(m[(1, 0)]), c(m[(1, 1)])]
            })
            .collect();
        Self {
            kind: NoiseKind::Kraus { operators },
            kraus,
        }
    }

    pub fn from_kind(kind: NoiseKind) -> Result<Self> {
        match kind {
            NoiseKind::Depolarizing { strength } => Self::depolarizing(strength),
            NoiseKind::AmplitudeDamping { gamma } => Self::amplitude_damping(gamma),
            NoiseKind::Kraus { operators } => {
                let c = |z: [f64; 2]| C64::new(z[0], z[1]);
                Ok(Self::from_kraus(
                    operators
                        .iter()
                        .map(|e| Mat2::new(c(e[0]), c(e[1]), c(e[2]), c(e[3])))
                        .collect(),
                ))
            }
        }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn kraus(&self) -> &[Mat2] {
        &self.kraus
    }

    /// Max absolute entry of `Σ K†K - I`.
    pub fn trace_preservation_defect(&self) -> f64 {
        let sum: Mat2 = self.kraus.iter().map(|k| k.adjoint() * k).sum();
        max_abs_diff(&sum, &identity2())
    }

    pub fn check_trace_preserving(&self) -> Result<()> {
        let defect = self.trace_preservation_defect();
        if defect > 1e-12 {
            return Err(Error::NotTracePreserving(defect));
        }
        Ok(())
    }

    /// `E(ρ) = Σ K ρ K†`.
    pub fn apply(&self, rho: &Mat2) -> Mat2 {
        self.kraus.iter().map(|k| k * rho * k.adjoint()).sum()
    }

    pub fn bloch(&self) -> BlochSuperoperator {
        bloch_of_map(|x| self.apply(x))
    }

    /// Short text form, e.g. `depolarizing:0.2`, parsed by [`NoiseModel::parse`].
    pub fn descriptor(&self) -> String {
        match &self.kind {
            NoiseKind::Depolarizing { strength } => format!("depolarizing:{strength}"),
            NoiseKind::AmplitudeDamping { gamma } => format!("amplitude_damping:{gamma}"),
            NoiseKind::Kraus { .. } => format!(
                "kraus:{}",
                serde_json::to_string(&self.kind).expect("noise kind serializes")
            ),
        }
    }

    /// Parses `none`, `depolarizing:<q>`, `depol-p:<p>` (GHZ convention),
    /// `amplitude_damping:<γ>` / `ad:<γ>`, or a `kraus:` JSON payload.
    /// Returns `None` for `none`.
    pub fn parse(s: &str) -> Result<Option<NoiseModel>> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(None);
        }
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("noise spec `{s}` is missing `:<value>`")))?;
        if kind == "kraus" {
            let kind: NoiseKind = serde_json::from_str(value)?;
            return Self::from_kind(kind).map(Some);
        }
        let x: f64 = value
            .parse()
            .map_err(|_| invalid(format!("bad noise parameter `{value}`")))?;
        let model = match kind {
            "depolarizing" | "depol" => Self::depolarizing(x)?,
            "depol-p" => Self::depolarizing_p(x)?,
            "amplitude_damping" | "ad" => Self::amplitude_damping(x)?,
            _ => return Err(invalid(format!("unknown noise kind `{kind}`"))),
        };
        Ok(Some(model))
    }
}

/// The synthetic measurement channel `ρ ↦ Σ_a tr(E(ρ) M_a) S_a`, where `S_a` is
/// the (averaged) snapshot of outcome `a`, together with its cached inverse.
#[derive(Clone, Debug)]
pub struct MeasurementChannel {
    povm: Povm,
    rule: SnapshotRule,
    noise: Option<NoiseModel>,
    sampling_povm: Povm,
    snapshots: Vec<[f64; 4]>,
    noiseless_forward: BlochSuperoperator,
    forward: BlochSuperoperator,
    inverse: BlochSuperoperator,
}

/// Builds the measurement channel of `povm`, optionally preceded by `noise`.
/// A non-invertible result is reported as an informationally incomplete POVM.
pub fn measurement_channel(
    povm: &Povm,
    rule: SnapshotRule,
    noise: Option<&NoiseModel>,
) -> Result<MeasurementChannel> {
    if let Some(v) = validate_povm(povm).first() {
        return Err(Error::InvalidPovm(v.to_string()));
    }
    let snapshots = (0..povm.k())
        .map(|a| snapshot_operator(povm, a, rule))
        .collect::<Result<Vec<_>>>()?;
    let noiseless_forward = bloch_of_map(|x| {
        let probs = povm.probabilities(x);
        let mut acc = [0.0; 4];
        for (p, s) in probs.iter().zip(&snapshots) {
            for i in 0..4 {
                acc[i] += p * s[i];
            }
        }
        from_bloch(acc)
    });
    let (forward, sampling_povm) = match noise {
        Some(n) => {
            n.check_trace_preserving()?;
            (noiseless_forward.compose(&n.bloch()), noise_adjoint_povm(povm, n)?)
        }
        None => (noiseless_forward, povm.clone()),
    };
    let inverse = invert(&forward)?;
    Ok(MeasurementChannel {
        povm: povm.clone(),
        rule,
        noise: noise.cloned(),
        sampling_povm,
        snapshots,
        noiseless_forward,
        forward,
        inverse,
    })
}

impl MeasurementChannel {
    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn rule(&self) -> SnapshotRule {
        self.rule
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    /// POVM whose Born law on the noiseless state equals the noisy law.
    pub fn sampling_povm(&self) -> &Povm {
        &self.sampling_povm
    }

    pub fn forward(&self) -> &BlochSuperoperator {
        &self.forward
    }

    pub fn inverse(&self) -> &BlochSuperoperator {
        &self.inverse
    }

    /// The measurement channel without the noise stage.
    pub fn noiseless_forward(&self) -> &BlochSuperoperator {
        &self.noiseless_forward
    }

    /// Bloch coordinates of the snapshot operator of outcome `a`.
    pub fn snapshot(&self, a: usize) -> [f64; 4] {
        self.snapshots[a]
    }

    /// Local classical shadow `M⁻¹(S_a)` for outcome `a`.
    pub fn local_shadow(&self, a: usize) -> Mat2 {
        from_bloch(self.inverse.apply_coords(self.snapshots[a]))
    }

    /// `[M⁻¹]†(σ_axis)`.
    pub fn adjoint_on_pauli(&self, axis: PauliAxis) -> SingleQubitOperator {
        let mut e = [0.0; 4];
        e[axis.index() + 1] = 1.0;
        SingleQubitOperator::from_bloch(self.inverse.adjoint().apply_coords(e))
    }

    /// Per-outcome estimator factors `tr([M⁻¹]†(σ_α) S_a)`.
    pub fn factor_table(&self) -> FactorTable {
        let k = self.povm.k();
        let factors = PauliAxis::ALL.map(|axis| {
            let y = self.adjoint_on_pauli(axis).bloch();
            (0..k)
                .map(|a| {
                    let s = self.snapshots[a];
                    2.0 * (y[0] * s[0] + y[1] * s[1] + y[2] * s[2] + y[3] * s[3])
                })
                .collect()
        });
        FactorTable {
            povm: self.povm.name().to_string(),
            noise: self.noise.clone(),
            factors,
            effects: self.sampling_povm.bloch().to_vec(),
        }
    }
}

/// Per-outcome values `Φ[α][a] = tr([M⁻¹]†(σ_α) S_a)`. The single-record
/// estimate of a Pauli string is the product of its factors over the support.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTable {
    povm: String,
    noise: Option<NoiseModel>,
    factors: [Vec<f64>; 3],
    effects: Vec<[f64; 4]>,
}

impl FactorTable {
    pub fn povm(&self) -> &str {
        &self.povm
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn k(&self) -> usize {
        self.effects.len()
    }

    pub fn factors(&self, axis: PauliAxis) -> &[f64] {
        &self.factors[axis.index()]
    }

    #[inline]
    pub fn factor(&self, axis: PauliAxis, outcome: usize) -> f64 {
        self.factors[axis.index()][outcome]
    }

    /// Bloch coordinates of the effective POVM elements that govern the
    /// outcome law (noise already pulled back onto the elements).
    pub fn effects(&self) -> &[[f64; 4]] {
        &self.effects
    }

    /// `max_a |Φ[α][a]|` maximized over the three axes.
    pub fn max_abs_factor(&self) -> f64 {
        self.factors
            .iter()
            .flatten()
            .fold(0.0, |m, f: &f64| m.max(f.abs()))
    }
}
