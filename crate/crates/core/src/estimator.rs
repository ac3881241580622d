//! Linear prediction of Pauli observables from shadow records, and the sample
//! complexity bounds that go with it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::FactorTable;
use crate::ensemble::ShadowEnsemble;
use crate::error::{invalid, Error, Result};
use crate::pauli::PauliObservable;
use crate::states::{local_product_expectation, QuantumState};

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMethod {
    Mean,
    MedianOfMeans { batches: usize },
}

impl EstimatorMethod {
    /// Median of means with `⌈2 ln(2L/δ)⌉` batches.
    pub fn default_median_of_means(observables: usize, delta: f64) -> Result<Self> {
        check_probability(delta)?;
        let b = (2.0 * (2.0 * observables.max(1) as f64 / delta).ln()).ceil() as usize;
        Ok(Self::MedianOfMeans { batches: b.max(1) })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Mean => "mean".into(),
            Self::MedianOfMeans { batches } => format!("mom{batches}"),
        }
    }
}

/// Streaming mean and variance (Welford); partial results merge exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Accumulator) -> Accumulator {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        Accumulator {
            count,
            mean: self.mean + d * nb / count as f64,
            m2: self.m2 + other.m2 + d * d * na * nb / count as f64,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two values).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard deviation of the single-record estimates.
    pub std: f64,
    /// `std / √N`.
    pub std_error: f64,
    pub records: usize,
}

fn check_table(ensemble: &ShadowEnsemble, table: &FactorTable) -> Result<()> {
    let table_noise = table.noise().map(|n| n.descriptor());
    if ensemble.povm() != table.povm()
        || ensemble.noise() != table_noise.as_deref()
        || ensemble.k() != table.k()
    {
        return Err(Error::Mismatch(format!(
            "records come from ({}, noise={}) but the factor table is for ({}, noise={})",
            ensemble.povm(),
            ensemble.noise().unwrap_or("none"),
            table.povm(),
            table_noise.as_deref().unwrap_or("none"),
        )));
    }
    Ok(())
}

/// Single-record estimate `c · Π_{(i,α)} Φ[α][a_i]`.
#[inline]
pub fn record_estimate(outcomes: &[u8], obs: &PauliObservable, table: &FactorTable) -> f64 {
    obs.support()
        .iter()
        .fold(obs.coefficient(), |acc, &(site, axis)| {
            acc * table.factor(axis, outcomes[site] as usize)
        })
}

fn accumulate(records: &[u8], n: usize, obs: &PauliObservable, table: &FactorTable) -> Accumulator {
    // fixed chunking keeps the result independent of the worker count
    records
        .par_chunks(CHUNK * n)
        .map(|chunk| {
            let mut acc = Accumulator::default();
            for r in chunk.chunks_exact(n) {
                acc.push(record_estimate(r, obs, table));
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(Accumulator::default(), |a, b| a.merge(b))
}

/// Predicts `tr(O ρ)` from the records.
pub fn estimate(
    ensemble: &ShadowEnsemble,
    obs: &PauliObservable,
    table: &FactorTable,
    method: EstimatorMethod,
) -> Result<Estimate> {
    check_table(ensemble, table)?;
    obs.check_support(ensemble.num_qubits())?;
    let n_rec = ensemble.len();
    if n_rec == 0 {
        return Err(invalid("cannot estimate from an empty ensemble"));
    }
    let n = ensemble.num_qubits();
    let all = accumulate(ensemble.outcomes(), n, obs, table);
    let value = match method {
        EstimatorMethod::Mean => all.mean(),
        EstimatorMethod::MedianOfMeans { batches } => {
            if batches == 0 || batches > n_rec {
                return Err(invalid(format!(
                    "median of means needs 1 ≤ batches ≤ N = {n_rec}, got {batches}"
                )));
            }
            let mut means: Vec<f64> = (0..batches)
                .map(|b| {
                    let lo = b * n_rec / batches;
                    let hi = (b + 1) * n_rec / batches;
                    let mut acc = Accumulator::default();
                    for j in lo..hi {
                        acc.push(record_estimate(ensemble.record(j).outcomes(), obs, table));
                    }
                    acc.mean()
                })
                .collect();
            means.sort_by(f64::total_cmp);
            let m = means.len();
            if m % 2 == 1 {
                means[m / 2]
            } else {
                0.5 * (means[m / 2 - 1] + means[m / 2])
            }
        }
    };
    let std = all.variance().sqrt();
    Ok(Estimate {
        value,
        std,
        std_error: std / (n_rec as f64).sqrt(),
        records: n_rec,
    })
}

/// [`estimate`] for many observables at once.
pub fn estimate_all(
    ensemble: &ShadowEnsemble,
    observables: &[PauliObservable],
    table: &FactorTable,
    method: EstimatorMethod,
) -> Result<Vec<Estimate>> {
    observables
        .iter()
        .map(|o| estimate(ensemble, o, table, method))
        .collect()
}

/// Squared range `(b - a)²` of the single-record estimate of any k-local
/// Pauli string: `(2 · max|Φ|^k)²`.
pub fn bound_constant(table: &FactorTable, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    (2.0 * table.max_abs_factor().powi(k as i32)).powi(2)
}

fn check_probability(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("failure probability δ = {delta} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) {
        return Err(invalid(format!("error ε = {epsilon} must be positive")));
    }
    Ok(())
}

// ceil that forgives floating-point noise just above an integer
fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    let n = if (x - r).abs() <= 1e-9 * r.max(1.0) { r } else { x.ceil() };
    (n as u64).max(1)
}

/// Hoeffding + union bound: `⌈B ln(2L/δ) / (2ε²)⌉`, at least 1.
pub fn required_samples(b: f64, l: usize, epsilon: f64, delta: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_probability(delta)?;
    if l == 0 {
        return Err(invalid("need at least one observable"));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid(format!("bound constant B = {b} must be finite and ≥ 0")));
    }
    Ok(ceil_count(b * (2.0 * l as f64 / delta).ln() / (2.0 * epsilon * epsilon)))
}

/// Chebyshev: `⌈Var / (ε² δ)⌉`, at least 1.
pub fn chebyshev_samples(variance: f64, epsilon: f64, delta: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_probability(delta)?;
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(invalid(format!("variance {variance} must be finite and ≥ 0")));
    }
    Ok(ceil_count(variance / (epsilon * epsilon * delta)))
}

/// Parameters and result of a sample-size calculation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBudget {
    pub b: f64,
    pub l: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub n: u64,
}

impl SampleBudget {
    pub fn new(b: f64, l: usize, epsilon: f64, delta: f64) -> Result<Self> {
        Ok(Self {
            b,
            l,
            epsilon,
            delta,
            n: required_samples(b, l, epsilon, delta)?,
        })
    }

    /// Budget for `l` observables of locality `k` under `table`.
    pub fn for_table(table: &FactorTable, k: usize, l: usize, epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(bound_constant(table, k), l, epsilon, delta)
    }
}

/// Second moment `E[ô²] = c² tr(ρ ⊗_i W_i)` with `W_i = Σ_a Φ[α_i][a]² M_a`,
/// which bounds the single-record variance. When every `W_i` is a multiple of
/// the identity the bound does not depend on the state and `state` may be
/// omitted.
pub fn variance_bound(
    table: &FactorTable,
    obs: &PauliObservable,
    state: Option<&dyn QuantumState>,
) -> Result<f64> {
    let ws: Vec<(usize, [f64; 4])> = obs
        .support()
        .iter()
        .map(|&(site, axis)| {
            let mut w = [0.0; 4];
            for (phi, e) in table.factors(axis).iter().zip(table.effects()) {
                for i in 0..4 {
                    w[i] += phi * phi * e[i];
                }
            }
            (site, w)
        })
        .collect();
    let c2 = obs.coefficient().powi(2);
    let scalar = ws.iter().all(|(_, w)| w[1..].iter().all(|x| x.abs() < 1e-12));
    if scalar {
        return Ok(c2 * ws.iter().map(|(_, w)| w[0]).product::<f64>());
    }
    let state = state.ok_or_else(|| {
        invalid(format!(
            "the variance bound of `{obs}` under {} depends on the state; supply one",
            table.povm()
        ))
    })?;
    obs.check_support(state.num_qubits())?;
    Ok(c2 * local_product_expectation(state, &ws))
}

/// `max_i |estimate_i - truth_i|`.
pub fn max_error(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(invalid(format!(
            "{} estimates but {} reference values",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(invalid("max error of an empty list"));
    }
    Ok(estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| (e - t).abs())
        .fold(0.0, f64::max))
}

/// One row of an estimation results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub observable: usize,
    pub support: String,
    pub method: String,
    pub n: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub truth: Option<f64>,
    pub abs_error: Option<f64>,
}

impl ResultRow {
    pub fn new(
        id: usize,
        obs: &PauliObservable,
        method: EstimatorMethod,
        est: &Estimate,
        truth: Option<f64>,
    ) -> Self {
        Self {
            observable: id,
            support: obs.to_string(),
            method: method.label(),
            n: est.records,
            estimate: est.value,
            std_error: est.std_error,
            truth,
            abs_error: truth.map(|t| (est.value - t).abs()),
        }
    }
}

pub fn write_results_csv(rows: &[ResultRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// JSON results document.
#[derive(Clone, Debug, Serialize)]
pub struct ResultsDocument<'a> {
    pub povm: &'a str,
    pub noise: Option<&'a str>,
    pub budget: Option<SampleBudget>,
    pub rows: &'a [ResultRow],
}
