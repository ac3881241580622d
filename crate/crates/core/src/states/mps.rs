use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DenseState, QuantumState, MAX_PURE_QUBITS};
use crate::error::{invalid, Error, Result};
use crate::pauli::{ket_along, PauliAxis};
use crate::{Mat2, C64};

/// Largest bond dimension accepted by the sampler.
pub const MAX_BOND_DIM: usize = 64;

/// One MPS site tensor with index order `(left, physical, right)`, stored
/// row-major: entry `(l, s, r)` lives at `(l * 2 + s) * right + r`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    right: usize,
    data: Vec<C64>,
}

impl SiteTensor {
    pub fn new(left: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if left == 0 || right == 0 {
            return Err(invalid("bond dimensions must be positive"));
        }
        if data.len() != left * 2 * right {
            return Err(invalid(format!(
                "site tensor of shape ({left}, 2, {right}) needs {} entries, got {}",
                left * 2 * right,
                data.len()
            )));
        }
        Ok(Self { left, right, data })
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[(l * 2 + s) * self.right + r]
    }

    /// The `left × right` matrix `A^s`.
    pub fn matrix(&self, s: usize) -> DMatrix<C64> {
        DMatrix::from_fn(self.left, self.right, |l, r| self.get(l, s, r))
    }
}

/// Open-boundary matrix product state of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsState {
    tensors: Vec<SiteTensor>,
}

/// Pushes a `(ket, bra)` environment through one site with local operator
/// `op`: `E'[c,c'] = Σ_{s,s'} op[s',s] Σ_{b,b'} E[b,b'] A[b,s,c] conj(A[b',s',c'])`.
pub(crate) fn transfer(env: &DMatrix<C64>, t: &SiteTensor, op: &Mat2) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(t.right, t.right);
    for s in 0..2 {
        // F[b', c] = Σ_b E[b, b'] A[b, s, c]
        let mut f = DMatrix::<C64>::zeros(t.left, t.right);
        for b in 0..t.left {
            for bp in 0..t.left {
                let e = env[(b, bp)];
                if e == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..t.right {
                    f[(bp, c)] += e * t.get(b, s, c);
                }
            }
        }
        for sp in 0..2 {
            let w = op[(sp, s)];
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for bp in 0..t.left {
                for c in 0..t.right {
                    let fc = f[(bp, c)] * w;
                    if fc == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for cp in 0..t.right {
                        out[(c, cp)] += fc * t.get(bp, sp, cp).conj();
                    }
                }
            }
        }
    }
    out
}

impl MpsState {
    /// Validates bond shapes, the bond-dimension cap and unit norm (1e-8).
    pub fn new(tensors: Vec<SiteTensor>) -> Result<Self> {
        if tensors.is_empty() {
            return Err(invalid("an MPS needs at least one site"));
        }
        if tensors[0].left != 1 || tensors[tensors.len() - 1].right != 1 {
            return Err(invalid("boundary bond dimensions must be 1"));
        }
        for (j, w) in tensors.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(invalid(format!(
                    "bond {j}: right dimension {} does not match next left dimension {}",
                    w[0].right, w[1].left
                )));
            }
        }
        let chi = tensors.iter().map(|t| t.right.max(t.left)).max().unwrap_or(1);
        if chi > MAX_BOND_DIM {
            return Err(Error::TooLarge {
                what: "MPS bond dimension",
                n: chi,
                max: MAX_BOND_DIM,
            });
        }
        let state = Self { tensors };
        let norm = state.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-8 {
            return Err(invalid(format!("MPS has squared norm {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    pub fn max_bond_dim(&self) -> usize {
        self.tensors.iter().map(|t| t.right).max().unwrap_or(1)
    }

    pub fn norm_sqr(&self) -> f64 {
        let id = Mat2::identity();
        let env = self
            .tensors
            .iter()
            .fold(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)), |e, t| transfer(&e, t, &id));
        env[(0, 0)].re
    }

    /// Contracts every bond into a dense vector (qubit 0 most significant).
    pub fn to_dense(&self) -> Result<DenseState> {
        let n = self.num_qubits();
        if n > MAX_PURE_QUBITS {
            return Err(Error::TooLarge {
                what: "MPS contraction",
                n,
                max: MAX_PURE_QUBITS,
            });
        }
        // rows: basis prefixes, cols: open right bond
        let mut acc = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for t in &self.tensors {
            let mut next = DMatrix::zeros(acc.nrows() * 2, t.right);
            for s in 0..2 {
                let block = &acc * t.matrix(s);
                for p in 0..acc.nrows() {
                    for r in 0..t.right {
                        next[(p * 2 + s, r)] = block[(p, r)];
                    }
                }
            }
            acc = next;
        }
        let v = DVector::from_iterator(acc.nrows(), acc.column(0).iter().copied());
        let norm = v.norm();
        DenseState::pure(v / C64::new(norm, 0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MpsDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MpsDocument = serde_json::from_str(s)?;
        doc.try_into()
    }
}

impl QuantumState for MpsState {
    fn num_qubits(&self) -> usize {
        self.tensors.len()
    }

    fn pauli_string_expectation(&self, support: &[(usize, PauliAxis)]) -> f64 {
        let id = Mat2::identity();
        let mut it = support.iter().peekable();
        let mut env = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for (j, t) in self.tensors.iter().enumerate() {
            let op = match it.peek() {
                Some(&&(site, axis)) if site == j => {
                    it.next();
                    axis.matrix()
                }
                _ => id,
            };
            env = transfer(&env, t, &op);
        }
        env[(0, 0)].re
    }
}

/// JSON interchange form of an MPS: one entry per site with `shape =
/// [left, 2, right]` and `data` listing `[re, im]` pairs in row-major
/// `(left, physical, right)` order.
#[derive(Debug, Serialize, Deserialize)]
pub struct MpsDocument {
    pub n: usize,
    pub sites: Vec<MpsSite>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MpsSite {
    pub shape: [usize; 3],
    pub data: Vec<[f64; 2]>,
}

impl From<&MpsState> for MpsDocument {
    fn from(m: &MpsState) -> Self {
        MpsDocument {
            n: m.num_qubits(),
            sites: m
                .tensors
                .iter()
                .map(|t| MpsSite {
                    shape: [t.left, 2, t.right],
                    data: t.data.iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MpsDocument> for MpsState {
    type Error = Error;

    fn try_from(doc: MpsDocument) -> Result<Self> {
        if doc.n != doc.sites.len() {
            return Err(Error::Format(format!(
                "MPS document declares n = {} but lists {} sites",
                doc.n,
                doc.sites.len()
            )));
        }
        let tensors = doc
            .sites
            .into_iter()
            .map(|s| {
                if s.shape[1] != 2 {
                    return Err(Error::Format(format!("physical dimension {} != 2", s.shape[1])));
                }
                SiteTensor::new(
                    s.shape[0],
                    s.shape[2],
                    s.data.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MpsState::new(tensors)
    }
}

/// `(|0…0⟩ + |1…1⟩)/√2` as a bond-dimension-2 MPS.
pub fn ghz(n: usize) -> Result<MpsState> {
    if n < 2 {
        return Err(invalid("a GHZ state needs at least 2 qubits"));
    }
    let one = C64::new(1.0, 0.0);
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    let mut tensors = Vec::with_capacity(n);
    // first: (1, s, r) = δ_{s r}/√2
    tensors.push(SiteTensor::new(1, 2, vec![h, z, z, h])?);
    for _ in 1..n - 1 {
        let mut data = vec![z; 8];
        data[0] = one; // (0, 0, 0)
        data[7] = one; // (1, 1, 1)
        tensors.push(SiteTensor::new(2, 2, data)?);
    }
    // last: (l, s, 1) = δ_{l s}
    tensors.push(SiteTensor::new(2, 1, vec![one, z, z, one])?);
    MpsState::new(tensors)
}

/// Product of pure single-qubit states given by unit Bloch vectors.
pub fn product_state(spins: &[[f64; 3]]) -> Result<MpsState> {
    if spins.is_empty() {
        return Err(invalid("a product state needs at least one qubit"));
    }
    let tensors = spins
        .iter()
        .map(|r| {
            let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if (len - 1.0).abs() > 1e-10 {
                return Err(invalid(format!(
                    "Bloch vector {r:?} has norm {len}; only pure product states are supported"
                )));
            }
            let v = ket_along([r[0] / len, r[1] / len, r[2] / len]);
            SiteTensor::new(1, 1, vec![v[0], v[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    MpsState::new(tensors)
}
