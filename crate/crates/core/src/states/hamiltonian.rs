//! Open-boundary spin-chain Hamiltonians and their exact ground states.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseState;
use crate::error::{invalid, Error, Result};
use crate::pauli::{PauliAxis, PauliMasks};
use crate::C64;

/// Largest chain handled by exact diagonalization.
pub const MAX_ED_QUBITS: usize = 12;
/// Up to this size the full spectrum is computed densely.
const DENSE_ED_QUBITS: usize = 8;
/// Ground-state gaps below this are reported as degenerate.
const DEGENERATE_GAP: f64 = 1e-10;

/// `H = Σ_t c_t P_t` with real coefficients on Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinHamiltonian {
    n: usize,
    terms: Vec<(f64, Vec<(usize, PauliAxis)>)>,
}

/// Couplings of one Heisenberg bond.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeisenbergBond {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl SpinHamiltonian {
    pub fn new(n: usize, terms: Vec<(f64, Vec<(usize, PauliAxis)>)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a Hamiltonian needs at least one site"));
        }
        for (c, support) in &terms {
            if !c.is_finite() {
                return Err(invalid("Hamiltonian coefficients must be finite"));
            }
            let mut sites: Vec<_> = support.iter().map(|&(s, _)| s).collect();
            sites.sort_unstable();
            if sites.windows(2).any(|w| w[0] == w[1]) || sites.last().is_some_and(|&s| s >= n) {
                return Err(invalid(format!("bad term support {support:?} for {n} sites")));
            }
        }
        Ok(Self { n, terms })
    }

    /// Transverse-field Ising chain `J Σ σ^z_i σ^z_{i+1} + h Σ σ^x_i`.
    pub fn tfim(n: usize, j: f64, h: f64) -> Result<Self> {
        let mut terms = Vec::new();
        for i in 0..n.saturating_sub(1) {
            terms.push((j, vec![(i, PauliAxis::Z), (i + 1, PauliAxis::Z)]));
        }
        for i in 0..n {
            terms.push((h, vec![(i, PauliAxis::X)]));
        }
        Self::new(n, terms)
    }

    /// `-½ Σ_j (J^x_j σ^x σ^x + J^y_j σ^y σ^y + J^z_j σ^z σ^z)_{j,j+1} - ½ h Σ_j σ^z_j`.
    pub fn heisenberg(n: usize, bonds: &[HeisenbergBond], h: f64) -> Result<Self> {
        if bonds.len() + 1 != n {
            return Err(invalid(format!(
                "an open chain of {n} sites has {} bonds, got {}",
                n.saturating_sub(1),
                bonds.len()
            )));
        }
        let mut terms = Vec::new();
        for (i, b) in bonds.iter().enumerate() {
            for (axis, jc) in [(PauliAxis::X, b.jx), (PauliAxis::Y, b.jy), (PauliAxis::Z, b.jz)] {
                terms.push((-0.5 * jc, vec![(i, axis), (i + 1, axis)]));
            }
        }
        if h != 0.0 {
            for i in 0..n {
                terms.push((-0.5 * h, vec![(i, PauliAxis::Z)]));
            }
        }
        Self::new(n, terms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, Vec<(usize, PauliAxis)>)] {
        &self.terms
    }

    fn compiled(&self) -> Result<Vec<(f64, PauliMasks)>> {
        self.terms
            .iter()
            .map(|(c, support)| {
                let m = PauliMasks::new(self.n, support);
                if m.y_count % 2 == 1 {
                    return Err(invalid(
                        "terms with an odd number of σ^y make H complex; not supported",
                    ));
                }
                Ok((*c, m))
            })
            .collect()
    }

    /// `out = H v` in the computational basis.
    fn apply(compiled: &[(f64, PauliMasks)], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (b, &vb) in v.iter().enumerate() {
            if vb == 0.0 {
                continue;
            }
            for (c, m) in compiled {
                out[b ^ m.flip] += c * m.real_phase(b) * vb;
            }
        }
    }

    /// Dense real matrix of `H` (n ≤ 10).
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        if self.n > 10 {
            return Err(Error::TooLarge {
                what: "dense Hamiltonian",
                n: self.n,
                max: 10,
            });
        }
        let compiled = self.compiled()?;
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            Self::apply(&compiled, &e, &mut col);
            e[j] = 0.0;
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }
}

/// Disordered XXZ chain with `J^x_j = J^y_j ~ U[0, 2]`, `J^z_j = J^x_j / 2` and
/// zero field, drawn reproducibly from `seed`.
pub fn disordered_heisenberg(n: usize, seed: u64) -> Result<(SpinHamiltonian, Vec<HeisenbergBond>)> {
    if n < 2 {
        return Err(invalid("a Heisenberg chain needs at least 2 sites"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bonds: Vec<_> = (0..n - 1)
        .map(|_| {
            let j = rng.random_range(0.0..2.0);
            HeisenbergBond {
                jx: j,
                jy: j,
                jz: j / 2.0,
            }
        })
        .collect();
    Ok((SpinHamiltonian::heisenberg(n, &bonds, 0.0)?, bonds))
}

/// Exact ground state with spectral diagnostics.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub state: DenseState,
    pub energy: f64,
    /// Distance to the next eigenvalue.
    pub gap: f64,
    /// Set when the gap is below 1e-10; `state` is then one vector of the
    /// degenerate ground space.
    pub degenerate: bool,
    /// `‖Hv - Ev‖`.
    pub residual: f64,
}

/// Full spectrum, ascending, with eigenvectors as columns.
pub fn dense_spectrum(h: &SpinHamiltonian) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(h.dense_matrix()?);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((values, vectors))
}

fn residual(compiled: &[(f64, PauliMasks)], v: &[f64], e: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    SpinHamiltonian::apply(compiled, v, &mut hv);
    hv.iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt()
}

fn finish(compiled: &[(f64, PauliMasks)], v: Vec<f64>, energy: f64, next: f64) -> Result<GroundState> {
    let residual = residual(compiled, &v, energy);
    if residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "ground state residual {residual:.3e} exceeds 1e-8"
        )));
    }
    let gap = next - energy;
    let amps = DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)));
    Ok(GroundState {
        state: DenseState::pure(amps)?,
        energy,
        gap,
        degenerate: gap < DEGENERATE_GAP,
        residual,
    })
}

/// Ground state of `h` by exact diagonalization (n ≤ 12): dense for small
/// chains, Lanczos beyond.
pub fn ground_state(h: &SpinHamiltonian) -> Result<GroundState> {
    if h.n > MAX_ED_QUBITS {
        return Err(Error::TooLarge {
            what: "exact diagonalization",
            n: h.n,
            max: MAX_ED_QUBITS,
        });
    }
    if h.n <= DENSE_ED_QUBITS {
        let compiled = h.compiled()?;
        let (values, vectors) = dense_spectrum(h)?;
        let mut v: Vec<f64> = vectors.column(0).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let next = values.get(1).copied().unwrap_or(f64::INFINITY);
        finish(&compiled, v, values[0], next)
    } else {
        lanczos_ground_state(h, 0x5eed)
    }
}

/// Lanczos with full reorthogonalization from a seeded random start. The gap
/// comes from a second run deflated against the ground vector.
pub fn lanczos_ground_state(h: &SpinHamiltonian, seed: u64) -> Result<GroundState> {
    if h.n > MAX_ED_QUBITS {
        return Err(Error::TooLarge {
            what: "exact diagonalization",
            n: h.n,
            max: MAX_ED_QUBITS,
        });
    }
    let compiled = h.compiled()?;
    let dim = 1usize << h.n;
    let apply = |v: &[f64], out: &mut [f64]| SpinHamiltonian::apply(&compiled, v, out);
    let (e0, v0) = lanczos_lowest(&apply, dim, &[], seed)?;
    let next = if dim > 1 {
        lanczos_lowest(&apply, dim, std::slice::from_ref(&v0), seed.wrapping_add(1))?.0
    } else {
        f64::INFINITY
    };
    finish(&compiled, v0, e0, next)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(w: &mut [f64], against: &[Vec<f64>]) {
    // two passes for numerical orthogonality
    for _ in 0..2 {
        for q in against {
            let c = dot(w, q);
            w.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

fn lanczos_lowest(
    apply: &dyn Fn(&[f64], &mut [f64]),
    dim: usize,
    deflate: &[Vec<f64>],
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let max_iter = (dim - deflate.len()).min(300);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    orthogonalize(&mut v, deflate);
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut best: Option<(f64, DVector<f64>)> = None;

    for j in 0..max_iter {
        apply(&basis[j], &mut w);
        let alpha = dot(&w, &basis[j]);
        alphas.push(alpha);
        orthogonalize(&mut w, deflate);
        orthogonalize(&mut w, &basis);
        let beta = dot(&w, &w).sqrt();

        let m = alphas.len();
        let last = j + 1 == max_iter || beta < 1e-12;
        if last || m % 10 == 0 {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imin, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty tridiagonal");
            let y = eig.eigenvectors.column(imin).into_owned();
            let ritz_residual = beta * y[m - 1].abs();
            best = Some((theta, y));
            if last || ritz_residual < 1e-11 * theta.abs().max(1.0) {
                break;
            }
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
        betas.push(beta);
    }

    let (theta, y) = best.ok_or_else(|| Error::Numerical("Lanczos produced no Ritz pair".into()))?;
    let mut v = vec![0.0; dim];
    for (coef, q) in y.iter().zip(&basis) {
        v.iter_mut().zip(q).for_each(|(x, qi)| *x += coef * qi);
    }
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    Ok((theta, v))
}
