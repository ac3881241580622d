//! Born-rule sampling of product-POVM outcomes, one site at a time from exact
//! conditionals.
//!
//! Record `j` of a run with seed `s` is drawn from its own ChaCha8 stream
//! (`seed = s`, `stream = j`), so any split of the record range across workers
//! or calls gives the same records.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::NoiseModel;
use crate::ensemble::ShadowEnsemble;
use crate::error::{invalid, Result};
use crate::povm::{noise_adjoint_povm, validate_povm, Invariant, Povm};
use crate::states::{DenseState, MpsState};
use crate::{Mat2, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// A state the sampler can draw records from.
pub trait Sampleable: Sync {
    /// Data computed once per sampling call and shared by all records.
    type Cache: Sync;

    fn num_qubits(&self) -> usize;

    fn prepare(&self) -> Result<Self::Cache>;

    /// Fills `out` with one record.
    fn draw(&self, cache: &Self::Cache, povm: &Povm, rng: &mut ChaCha8Rng, out: &mut [u8]);
}

fn record_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Index drawn from unnormalized non-negative `weights`.
fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Outcome probabilities of `povm` on the (possibly unnormalized) 2×2 state.
fn site_weights(povm: &Povm, rho: &Mat2, out: &mut Vec<f64>) {
    out.clear();
    out.extend(povm.probabilities(rho));
}

/// Records `range` of a run with seed `seed`.
pub fn sample_range<S: Sampleable + ?Sized>(
    state: &S,
    povm: &Povm,
    seed: u64,
    range: Range<usize>,
) -> Result<ShadowEnsemble> {
    // zero elements are harmless here (they are never drawn)
    if let Some(v) = validate_povm(povm)
        .iter()
        .find(|v| matches!(v.invariant, Invariant::Completeness | Invariant::Positivity | Invariant::Hermiticity | Invariant::TooFewElements))
    {
        return Err(crate::Error::InvalidPovm(v.to_string()));
    }
    let n = state.num_qubits();
    let cache = state.prepare()?;
    let mut outcomes = vec![0u8; n * range.len()];
    outcomes
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, out)| {
            let mut rng = record_rng(seed, (range.start + i) as u64);
            state.draw(&cache, povm, &mut rng, out);
        });
    ShadowEnsemble::new(n, povm.k(), povm.name(), None, vec![seed], outcomes)
}

/// `count` records from `state` measured with `povm` on every qubit.
pub fn sample<S: Sampleable + ?Sized>(state: &S, povm: &Povm, count: usize, seed: u64) -> Result<ShadowEnsemble> {
    sample_range(state, povm, seed, 0..count)
}

pub fn sample_dense(state: &DenseState, povm: &Povm, count: usize, seed: u64) -> Result<ShadowEnsemble> {
    sample(state, povm, count, seed)
}

pub fn sample_mps(state: &MpsState, povm: &Povm, count: usize, seed: u64) -> Result<ShadowEnsemble> {
    sample(state, povm, count, seed)
}

/// Records with outcome law `tr(E^{⊗n}(ρ) M_{a_1} ⊗ … ⊗ M_{a_n})`, drawn from
/// the noiseless state with the noise pulled back onto the POVM.
pub fn sample_noisy<S: Sampleable + ?Sized>(
    state: &S,
    povm: &Povm,
    noise: &NoiseModel,
    count: usize,
    seed: u64,
) -> Result<ShadowEnsemble> {
    sample_noisy_range(state, povm, noise, seed, 0..count)
}

pub fn sample_noisy_range<S: Sampleable + ?Sized>(
    state: &S,
    povm: &Povm,
    noise: &NoiseModel,
    seed: u64,
    range: Range<usize>,
) -> Result<ShadowEnsemble> {
    let effective = noise_adjoint_povm(povm, noise)?;
    let e = sample_range(state, &effective, seed, range)?;
    ShadowEnsemble::new(
        e.num_qubits(),
        e.k(),
        povm.name(),
        Some(noise.descriptor()),
        e.seeds().to_vec(),
        e.outcomes().to_vec(),
    )
}

/// Records of the noisy state `E^{⊗n}(ρ)` measured with a noiseless `povm`.
/// The noise is kept as preparation provenance, so estimates target the
/// noisy state rather than undoing the noise.
pub fn sample_noisy_state<S: Sampleable + ?Sized>(
    state: &S,
    povm: &Povm,
    noise: &NoiseModel,
    count: usize,
    seed: u64,
) -> Result<ShadowEnsemble> {
    let e = sample_noisy(state, povm, noise, count, seed)?;
    Ok(ShadowEnsemble::new(
        e.num_qubits(),
        e.k(),
        povm.name(),
        None,
        e.seeds().to_vec(),
        e.outcomes().to_vec(),
    )?
    .with_prep_noise(Some(noise.descriptor())))
}

impl Sampleable for DenseState {
    type Cache = ();

    fn num_qubits(&self) -> usize {
        crate::states::QuantumState::num_qubits(self)
    }

    fn prepare(&self) -> Result<()> {
        Ok(())
    }

    fn draw(&self, _: &(), povm: &Povm, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        match self {
            DenseState::Pure { amplitudes, .. } => draw_pure(amplitudes, povm, rng, out),
            DenseState::Mixed { matrix, .. } => draw_mixed(matrix, povm, rng, out),
        }
    }
}

// After outcome a on the leading qubit, the remaining qubits are left in
// Σ_i λ_i ⟨v_i|ψ⟩⟨ψ|v_i⟩ (eigen-decomposition of M_a). Drawing one branch i
// keeps the state pure and halves its dimension.
fn draw_pure(psi: &DVector<C64>, povm: &Povm, rng: &mut ChaCha8Rng, out: &mut [u8]) {
    let mut cur: Vec<C64> = psi.iter().copied().collect();
    let mut weights = Vec::with_capacity(povm.k());
    for slot in out.iter_mut() {
        let half = cur.len() / 2;
        let (lo, hi) = cur.split_at(half);
        let mut rho = Mat2::zeros();
        for (x, y) in lo.iter().zip(hi) {
            rho[(0, 0)] += x * x.conj();
            rho[(1, 1)] += y * y.conj();
            rho[(1, 0)] += y * x.conj();
        }
        rho[(0, 1)] = rho[(1, 0)].conj();
        site_weights(povm, &rho, &mut weights);
        let a = pick(rng, &weights);
        *slot = a as u8;
        if half == 0 {
            break;
        }
        let eig = povm.eigen(a);
        let branches: [Vec<C64>; 2] = eig.vectors.map(|v| {
            let (c0, c1) = (v[0].conj(), v[1].conj());
            lo.iter().zip(hi).map(|(x, y)| c0 * x + c1 * y).collect()
        });
        let bw: Vec<f64> = (0..2)
            .map(|i| eig.values[i].max(0.0) * branches[i].iter().map(|z| z.norm_sqr()).sum::<f64>())
            .collect();
        let i = pick(rng, &bw);
        let norm = bw[i] / eig.values[i].max(f64::MIN_POSITIVE);
        let scale = 1.0 / norm.sqrt();
        let [b0, b1] = branches;
        cur = if i == 0 { b0 } else { b1 };
        cur.iter_mut().for_each(|z| *z *= scale);
    }
}

// Conditional state of the unmeasured qubits: Σ_{s,s'} M_a[s',s] ρ_{s s'} / p.
fn draw_mixed(rho: &DMatrix<C64>, povm: &Povm, rng: &mut ChaCha8Rng, out: &mut [u8]) {
    let mut cur = rho.clone();
    let mut weights = Vec::with_capacity(povm.k());
    for slot in out.iter_mut() {
        let half = cur.nrows() / 2;
        let mut site = Mat2::zeros();
        for s in 0..2 {
            for sp in 0..2 {
                site[(s, sp)] = (0..half).map(|r| cur[(s * half + r, sp * half + r)]).sum();
            }
        }
        site_weights(povm, &site, &mut weights);
        let a = pick(rng, &weights);
        *slot = a as u8;
        if half == 0 {
            break;
        }
        let m = povm.element(a);
        let p = weights[a];
        let mut next = DMatrix::zeros(half, half);
        for s in 0..2 {
            for sp in 0..2 {
                let w = m[(sp, s)] / p;
                if w == ZERO {
                    continue;
                }
                next += cur.view((s * half, sp * half), (half, half)) * w;
            }
        }
        cur = next;
    }
}

/// Per site `j`, the matrices `G[s][s'] = A^s R_j A^{s'†}` where `R_j` is the
/// right environment, so that `ρ_j[s,s'] = Σ L ∘ G[s][s']` for a left
/// environment `L`.
pub struct MpsCache {
    g: Vec<[[DMatrix<C64>; 2]; 2]>,
}

impl Sampleable for MpsState {
    type Cache = MpsCache;

    fn num_qubits(&self) -> usize {
        MpsState::num_qubits(self)
    }

    fn prepare(&self) -> Result<MpsCache> {
        let ts = self.tensors();
        let n = ts.len();
        let mut g = Vec::with_capacity(n);
        let mut r = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for t in ts.iter().rev() {
            let a = [t.matrix(0), t.matrix(1)];
            let ar = [&a[0] * &r, &a[1] * &r];
            g.push([0, 1].map(|s| [0, 1].map(|sp| &ar[s] * a[sp].adjoint())));
            r = &g.last().unwrap()[0][0] + &g.last().unwrap()[1][1];
        }
        g.reverse();
        Ok(MpsCache { g })
    }

    fn draw(&self, cache: &MpsCache, povm: &Povm, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        let mut left = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let mut weights = Vec::with_capacity(povm.k());
        for (j, t) in self.tensors().iter().enumerate() {
            let g = &cache.g[j];
            let mut rho = Mat2::zeros();
            for s in 0..2 {
                for sp in 0..2 {
                    rho[(s, sp)] = left.iter().zip(g[s][sp].iter()).map(|(l, x)| l * x).sum();
                }
            }
            site_weights(povm, &rho, &mut weights);
            let a = pick(rng, &weights);
            out[j] = a as u8;
            let p = weights[a];
            left = crate::states::transfer(&left, t, povm.element(a)) / C64::new(p, 0.0);
        }
    }
}

/// Exact outcome distribution over all `k^n` tuples (tuple index in base `k`,
/// qubit 0 most significant). Used as an oracle; `k^n` must stay small.
pub fn exact_outcome_distribution(state: &DenseState, povm: &Povm) -> Result<Vec<f64>> {
    let n = crate::states::QuantumState::num_qubits(state);
    let k = povm.k();
    let total = k
        .checked_pow(n as u32)
        .filter(|&t| t <= 1 << 20)
        .ok_or_else(|| invalid("outcome space too large to enumerate"))?;
    let rho = state.density_matrix()?;
    let dim = 1usize << n;
    let mut probs = Vec::with_capacity(total);
    for code in 0..total {
        let mut digits = vec![0usize; n];
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = c % k;
            c /= k;
        }
        // tr(ρ ⊗_i M_{a_i}) = Σ_{b,b'} ρ[b,b'] Π_i M_i[b'_i, b_i]
        let mut p = ZERO;
        for b in 0..dim {
            for bp in 0..dim {
                let r = rho[(b, bp)];
                if r == ZERO {
                    continue;
                }
                let mut w = r;
                for (i, &a) in digits.iter().enumerate() {
                    let shift = n - 1 - i;
                    w *= povm.element(a)[((bp >> shift) & 1, (b >> shift) & 1)];
                }
                p += w;
            }
        }
        probs.push(p.re);
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::builtin_povm;
    use crate::states::{ghz, product_state};

    fn frequencies(e: &ShadowEnsemble, site: usize) -> Vec<f64> {
        let mut f = vec![0.0; e.k()];
        for r in e.records() {
            f[r.outcome(site)] += 1.0;
        }
        f.iter().map(|c| c / e.len() as f64).collect()
    }

    #[test]
    fn zero_state_pauli6_frequencies() {
        let s = DenseState::basis(&[0]).unwrap();
        let e = sample_dense(&s, &builtin_povm("pauli6").unwrap(), 60_000, 1).unwrap();
        let f = frequencies(&e, 0);
        let expect = [1.0 / 3.0, 0.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 0.01, "{f:?}");
        }
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn maximally_mixed_pauli4_frequencies() {
        let s = DenseState::maximally_mixed(1).unwrap();
        let e = sample_dense(&s, &builtin_povm("pauli4").unwrap(), 60_000, 2).unwrap();
        let f = frequencies(&e, 0);
        for (a, b) in f.iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!((a - b).abs() < 0.01, "{f:?}");
        }
    }

    #[test]
    fn empty_request_gives_empty_ensemble() {
        let s = DenseState::basis(&[0, 1]).unwrap();
        let e = sample_dense(&s, &builtin_povm("tetra").unwrap(), 0, 3).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.num_qubits(), 2);
    }

    #[test]
    fn ranges_concatenate_to_full_run() {
        let s = ghz(5).unwrap();
        let p = builtin_povm("pauli6").unwrap();
        let full = sample_mps(&s, &p, 100, 9).unwrap();
        let mut a = sample_range(&s, &p, 9, 0..37).unwrap();
        a.merge(&sample_range(&s, &p, 9, 37..100).unwrap()).unwrap();
        assert_eq!(a, full);
    }

    #[test]
    fn all_down_product_state() {
        let s = product_state(&[[0.0, 0.0, -1.0]; 8]).unwrap();
        let e = sample_mps(&s, &builtin_povm("pauli6").unwrap(), 20_000, 4).unwrap();
        for site in [0, 7] {
            let f = frequencies(&e, site);
            assert_eq!(f[0], 0.0);
            assert!((f[1] - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn amplitude_damping_sends_one_to_zero() {
        let s = DenseState::basis(&[1]).unwrap();
        let noise = NoiseModel::amplitude_damping(1.0).unwrap();
        let e = sample_noisy(&s, &builtin_povm("pauli6").unwrap(), &noise, 30_000, 5).unwrap();
        let f = frequencies(&e, 0);
        assert!((f[0] - 1.0 / 3.0).abs() < 0.015);
        assert_eq!(f[1], 0.0);
        assert_eq!(e.noise(), Some(noise.descriptor().as_str()));
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        let s = ghz(3).unwrap().to_dense().unwrap();
        for name in ["pauli6", "pauli4", "tetra"] {
            let p = exact_outcome_distribution(&s, &builtin_povm(name).unwrap()).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&x| x > -1e-12));
        }
    }
}
