//! The experiment drivers behind each subcommand. Each returns its CSV rows;
//! nothing is written until a driver has finished.

use icshadow::channel::measurement_channel;
use icshadow::estimator::estimate_all;
use icshadow::states::exact_expectation_with_noise;
use icshadow::{
    estimate, fidelity_pure, hypothesis_state, max_error, project_to_physical,
    EstimatorMethod, NoiseModel, SnapshotRule,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_povm, observables, BuiltState, ExperimentConfig, StateSpec};
use crate::CliError;

pub const DEFAULT_P_GRID: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_SCALING_GRID: [usize; 4] = [500, 1000, 2000, 5000];
pub const DEFAULT_FIDELITY_GRID: [usize; 2] = [1000, 10_000];
pub const DEFAULT_FIDELITY_SIZES: [usize; 4] = [2, 4, 6, 8];
pub const ISING_REGIMES: [(&str, f64, f64); 3] = [("J=h", 1.0, 1.0), ("J>h", 1.0, 0.5), ("J<h", 0.5, 1.0)];

fn channel(povm: &str, noise: Option<&NoiseModel>) -> Result<icshadow::MeasurementChannel, CliError> {
    Ok(measurement_channel(&load_povm(povm)?, SnapshotRule::Limit, noise)?)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Serialize)]
pub struct CorrelatorRow {
    pub p: f64,
    pub observable: String,
    pub samples: usize,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub truth: f64,
}

/// Two-point functions of a state under local depolarizing noise of
/// strength `p` (`ρ ↦ (1 - 4p/3)ρ + (4p/3)·I/2` per qubit). The noise is
/// part of the state, so the noiseless inverse is used.
pub fn ghz_correlators(cfg: &ExperimentConfig) -> Result<Vec<CorrelatorRow>, CliError> {
    let spec = cfg.state.clone().unwrap_or(StateSpec::Ghz(30));
    let samples = cfg.samples_or(5000)?;
    let runs = cfg.runs_or(10)?;
    let seed = cfg.seed.unwrap_or(1);
    let grid = cfg.noise_grid.clone().unwrap_or_else(|| DEFAULT_P_GRID.to_vec());
    let noises = grid
        .iter()
        .map(|&p| NoiseModel::depolarizing_p(p).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(CliError::Config("noise grid is empty".into()));
    }
    spec.check()?;
    let ch = channel(cfg.povm.as_deref().unwrap_or("pauli6"), None)?;
    let table = ch.factor_table();
    let state = spec.build()?;
    let obs = observables(cfg.observables.as_deref().unwrap_or("pairs0"), state.num_qubits())?;

    let mut rows = Vec::new();
    for (g, (&p, noise)) in grid.iter().zip(&noises).enumerate() {
        let mut per_run = vec![Vec::with_capacity(runs); obs.len()];
        for r in 0..runs {
            let e = state.sample_noisy_state(ch.povm(), noise, samples, seed + (g * runs + r) as u64)?;
            for (o, est) in estimate_all(&e, &obs, &table, EstimatorMethod::Mean)?.into_iter().enumerate() {
                per_run[o].push(est.value);
            }
        }
        for (o, values) in obs.iter().zip(&per_run) {
            let truth = match &state {
                BuiltState::Mps(m) => exact_expectation_with_noise(m, o, noise)?,
                BuiltState::Dense(d) => exact_expectation_with_noise(d, o, noise)?,
            };
            let (mean, std) = mean_std(values);
            rows.push(CorrelatorRow {
                p,
                observable: o.to_string(),
                samples,
                runs,
                mean,
                std,
                truth,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct ScalingRow {
    pub state: String,
    pub povm: String,
    pub samples: usize,
    pub run: usize,
    pub seed: u64,
    pub max_error: f64,
}

/// Maximum error over an observable set (all two-point ⟨z z⟩ by default) as
/// the number of samples grows, for each POVM.
pub fn max_error_scaling(cfg: &ExperimentConfig) -> Result<Vec<ScalingRow>, CliError> {
    let specs = match &cfg.state {
        Some(s) => vec![s.clone()],
        None => vec![
            StateSpec::Ghz(30),
            StateSpec::Product { n: 30, axis: icshadow::PauliAxis::Z, up: false },
        ],
    };
    let povms = cfg
        .povms
        .clone()
        .or_else(|| cfg.povm.clone().map(|p| vec![p]))
        .unwrap_or_else(|| vec!["pauli6".into(), "pauli4".into(), "tetra".into()]);
    let grid = cfg.sample_grid_or(&DEFAULT_SCALING_GRID)?;
    let runs = cfg.runs_or(5)?;
    let seed = cfg.seed.unwrap_or(1);
    let noise = cfg.noise_model()?;
    for s in &specs {
        s.check()?;
    }
    let channels = povms
        .iter()
        .map(|p| channel(p, noise.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut counter = 0u64;
    for spec in &specs {
        let state = spec.build()?;
        let obs = observables(cfg.observables.as_deref().unwrap_or("all-pairs"), state.num_qubits())?;
        let truths = obs.iter().map(|o| state.exact(o)).collect::<Result<Vec<_>, _>>()?;
        for (name, ch) in povms.iter().zip(&channels) {
            let table = ch.factor_table();
            for &n in &grid {
                for run in 0..runs {
                    let s = seed + counter;
                    counter += 1;
                    let e = state.sample(ch.povm(), noise.as_ref(), n, s)?;
                    let est: Vec<f64> = estimate_all(&e, &obs, &table, EstimatorMethod::Mean)?
                        .iter()
                        .map(|x| x.value)
                        .collect();
                    rows.push(ScalingRow {
                        state: spec.to_string(),
                        povm: name.clone(),
                        samples: n,
                        run,
                        seed: s,
                        max_error: max_error(&est, &truths)?,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct GroundStateRow {
    pub regime: String,
    pub observable: String,
    pub samples: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub truth: f64,
    pub abs_error: f64,
}

/// Shadow estimates of every `⟨z_i z_j⟩` against exact values.
fn correlations(
    regime: &str,
    state: &BuiltState,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<GroundStateRow>, CliError> {
    let samples = cfg.samples_or(5000)?;
    let noise = cfg.noise_model()?;
    let ch = channel(cfg.povm.as_deref().unwrap_or("pauli6"), noise.as_ref())?;
    let table = ch.factor_table();
    let obs = observables(cfg.observables.as_deref().unwrap_or("all-pairs"), state.num_qubits())?;
    let e = state.sample(ch.povm(), noise.as_ref(), samples, seed)?;
    obs.iter()
        .map(|o| {
            let est = estimate(&e, o, &table, EstimatorMethod::Mean)?;
            let truth = state.exact(o)?;
            Ok(GroundStateRow {
                regime: regime.to_string(),
                observable: o.to_string(),
                samples,
                estimate: est.value,
                std_error: est.std_error,
                truth,
                abs_error: (est.value - truth).abs(),
            })
        })
        .collect()
}

/// Transverse-field Ising ground states, `H = J Σ z z + h Σ x`, in the three
/// regimes `J = h`, `J > h` and `J < h` (or the single one given by a
/// `tfim:` state).
pub fn ising(cfg: &ExperimentConfig) -> Result<Vec<GroundStateRow>, CliError> {
    let regimes: Vec<(String, StateSpec)> = match &cfg.state {
        Some(s @ StateSpec::Tfim { j, h, .. }) => vec![(format!("J={j},h={h}"), s.clone())],
        Some(other) => {
            return Err(CliError::Config(format!("ising needs a tfim state, got `{other}`")));
        }
        None => ISING_REGIMES
            .iter()
            .map(|&(name, j, h)| (name.to_string(), StateSpec::Tfim { j, h, n: 10 }))
            .collect(),
    };
    for (_, s) in &regimes {
        s.check()?;
    }
    cfg.samples_or(5000)?;
    let seed = cfg.seed.unwrap_or(1);
    let mut rows = Vec::new();
    for (r, (name, spec)) in regimes.iter().enumerate() {
        rows.extend(correlations(name, &spec.build()?, cfg, seed + r as u64)?);
    }
    Ok(rows)
}

/// Ground state of the disordered Heisenberg chain.
pub fn heisenberg(cfg: &ExperimentConfig) -> Result<Vec<GroundStateRow>, CliError> {
    let spec = cfg.state.clone().unwrap_or(StateSpec::Heisenberg { seed: 1, n: 10 });
    if !matches!(spec, StateSpec::Heisenberg { .. }) {
        return Err(CliError::Config(format!("heisenberg needs a heisenberg state, got `{spec}`")));
    }
    spec.check()?;
    cfg.samples_or(5000)?;
    correlations(&spec.to_string(), &spec.build()?, cfg, cfg.seed.unwrap_or(1000))
}

/// Greedy disjoint pairing, most negative `⟨z_i z_j⟩` first.
pub fn singlet_pairs(n: usize, pairs: &[((usize, usize), f64)]) -> Vec<(usize, usize)> {
    let mut sorted: Vec<_> = pairs.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut used = vec![false; n];
    let mut out = Vec::new();
    for ((i, j), c) in sorted {
        if c < 0.0 && !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

/// Decay rate `κ` of a least-squares fit `ln|C(r)| ≈ a - κ r`.
pub fn decay_rate(values: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = values
        .iter()
        .filter(|(_, c)| c.abs() > 1e-12)
        .map(|&(r, c)| (r, c.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    -sxy / sxx
}

#[derive(Debug, Serialize)]
pub struct FidelityRow {
    pub n: usize,
    pub samples: usize,
    pub run: usize,
    pub seed: u64,
    pub raw: f64,
    pub projected: f64,
}

/// GHZ fidelity of the raw hypothesis state and of its projection onto
/// density matrices.
pub fn fidelity(cfg: &ExperimentConfig) -> Result<Vec<FidelityRow>, CliError> {
    let sizes = cfg.sizes.clone().unwrap_or_else(|| DEFAULT_FIDELITY_SIZES.to_vec());
    if let Some(&bad) = sizes.iter().find(|&&n| !(2..=icshadow::fidelity::MAX_HYPOTHESIS_QUBITS).contains(&n)) {
        return Err(CliError::Config(format!(
            "fidelity needs 2 ≤ n ≤ {}, got {bad}",
            icshadow::fidelity::MAX_HYPOTHESIS_QUBITS
        )));
    }
    let grid = cfg.sample_grid_or(&DEFAULT_FIDELITY_GRID)?;
    let runs = cfg.runs_or(10)?;
    let seed = cfg.seed.unwrap_or(1);
    let ch = channel(cfg.povm.as_deref().unwrap_or("pauli6"), None)?;

    let mut jobs = Vec::new();
    for &n in &sizes {
        for &samples in &grid {
            for run in 0..runs {
                jobs.push((n, samples, run, seed + jobs.len() as u64));
            }
        }
    }
    jobs.par_iter()
        .map(|&(n, samples, run, s)| {
            let mps = icshadow::ghz(n)?;
            let target = mps
                .to_dense()?
                .amplitudes()
                .cloned()
                .ok_or_else(|| CliError::Numerical("GHZ state is not pure".into()))?;
            let e = icshadow::sample(&mps, ch.povm(), samples, s)?;
            let sigma = hypothesis_state(&e, &ch)?;
            Ok(FidelityRow {
                n,
                samples,
                run,
                seed: s,
                raw: fidelity_pure(sigma.matrix(), &target)?,
                projected: fidelity_pure(&project_to_physical(sigma.matrix())?, &target)?,
            })
        })
        .collect()
}
