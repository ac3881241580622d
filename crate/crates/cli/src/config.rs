//! Experiment configuration: a TOML file whose fields can be overridden from
//! the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use icshadow::states::{disordered_heisenberg, MAX_ED_QUBITS};
use icshadow::{
    builtin_povm, ghz, ground_state, product_state, sample, sample_noisy, sample_noisy_state,
    DenseState, MpsState, NoiseModel, PauliAxis, PauliObservable, Povm, ShadowEnsemble,
    SpinHamiltonian,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Which reference state to measure.
///
/// Text forms: `ghz:<n>`, `product:<n>:<axis><sign>` (e.g. `product:30:z-`
/// for all spins down), `tfim:<J>:<h>:<n>`, `heisenberg:<seed>:<n>`,
/// `mps:<path>` (JSON tensors).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StateSpec {
    Ghz(usize),
    Product { n: usize, axis: PauliAxis, up: bool },
    Tfim { j: f64, h: f64, n: usize },
    Heisenberg { seed: u64, n: usize },
    Mps(PathBuf),
}

impl FromStr for StateSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("bad state spec `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let real = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let spec = match parts.as_slice() {
            ["ghz", n] => StateSpec::Ghz(int(n)?),
            ["product", n, dir] => {
                let (axis, sign) = dir.split_at(dir.len().min(1));
                let up = match sign {
                    "+" | "" => true,
                    "-" => false,
                    _ => return Err(bad()),
                };
                StateSpec::Product {
                    n: int(n)?,
                    axis: axis.parse().map_err(|_| bad())?,
                    up,
                }
            }
            ["tfim", j, h, n] => StateSpec::Tfim {
                j: real(j)?,
                h: real(h)?,
                n: int(n)?,
            },
            ["heisenberg", seed, n] => StateSpec::Heisenberg {
                seed: seed.parse().map_err(|_| bad())?,
                n: int(n)?,
            },
            ["mps", path @ ..] if !path.is_empty() => StateSpec::Mps(PathBuf::from(path.join(":"))),
            _ => return Err(bad()),
        };
        if spec.num_qubits() == Some(0) {
            return Err(CliError::Config(format!("state `{s}` has no qubits")));
        }
        Ok(spec)
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Ghz(n) => write!(f, "ghz:{n}"),
            StateSpec::Product { n, axis, up } => {
                write!(f, "product:{n}:{}{}", axis.symbol().to_ascii_lowercase(), if *up { '+' } else { '-' })
            }
            StateSpec::Tfim { j, h, n } => write!(f, "tfim:{j}:{h}:{n}"),
            StateSpec::Heisenberg { seed, n } => write!(f, "heisenberg:{seed}:{n}"),
            StateSpec::Mps(p) => write!(f, "mps:{}", p.display()),
        }
    }
}

impl TryFrom<String> for StateSpec {
    type Error = CliError;

    fn try_from(s: String) -> Result<Self, CliError> {
        s.parse()
    }
}

impl From<StateSpec> for String {
    fn from(s: StateSpec) -> String {
        s.to_string()
    }
}

impl StateSpec {
    pub fn num_qubits(&self) -> Option<usize> {
        match self {
            StateSpec::Ghz(n)
            | StateSpec::Product { n, .. }
            | StateSpec::Tfim { n, .. }
            | StateSpec::Heisenberg { n, .. } => Some(*n),
            StateSpec::Mps(_) => None,
        }
    }

    /// Checks size limits without building anything.
    pub fn check(&self) -> Result<(), CliError> {
        match self {
            StateSpec::Ghz(n) if *n < 2 => Err(CliError::Config("a GHZ state needs n ≥ 2".into())),
            StateSpec::Tfim { n, .. } | StateSpec::Heisenberg { n, .. } if *n > MAX_ED_QUBITS || *n < 2 => {
                Err(CliError::Config(format!(
                    "ground states are computed exactly and need 2 ≤ n ≤ {MAX_ED_QUBITS}; \
                     import larger states as MPS tensors"
                )))
            }
            StateSpec::Mps(p) if !p.exists() => {
                Err(CliError::Config(format!("MPS file {} does not exist", p.display())))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<BuiltState, CliError> {
        self.check()?;
        Ok(match self {
            StateSpec::Ghz(n) => BuiltState::Mps(ghz(*n)?),
            StateSpec::Product { n, axis, up } => {
                let mut r = [0.0; 3];
                r[axis.index()] = if *up { 1.0 } else { -1.0 };
                BuiltState::Mps(product_state(&vec![r; *n])?)
            }
            StateSpec::Tfim { j, h, n } => {
                BuiltState::Dense(ground_state(&SpinHamiltonian::tfim(*n, *j, *h)?)?.state)
            }
            StateSpec::Heisenberg { seed, n } => {
                let (ham, _) = disordered_heisenberg(*n, *seed)?;
                BuiltState::Dense(ground_state(&ham)?.state)
            }
            StateSpec::Mps(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                BuiltState::Mps(MpsState::from_json(&text)?)
            }
        })
    }
}

pub enum BuiltState {
    Mps(MpsState),
    Dense(DenseState),
}

impl BuiltState {
    pub fn num_qubits(&self) -> usize {
        match self {
            BuiltState::Mps(m) => m.num_qubits(),
            BuiltState::Dense(d) => icshadow::states::QuantumState::num_qubits(d),
        }
    }

    pub fn exact(&self, obs: &PauliObservable) -> Result<f64, CliError> {
        Ok(match self {
            BuiltState::Mps(m) => icshadow::exact_expectation(m, obs)?,
            BuiltState::Dense(d) => icshadow::exact_expectation(d, obs)?,
        })
    }

    /// Records with `noise` applied to the measurement (inverted later).
    pub fn sample(&self, povm: &Povm, noise: Option<&NoiseModel>, count: usize, seed: u64) -> Result<ShadowEnsemble, CliError> {
        Ok(match (self, noise) {
            (BuiltState::Mps(m), None) => sample(m, povm, count, seed)?,
            (BuiltState::Dense(d), None) => sample(d, povm, count, seed)?,
            (BuiltState::Mps(m), Some(e)) => sample_noisy(m, povm, e, count, seed)?,
            (BuiltState::Dense(d), Some(e)) => sample_noisy(d, povm, e, count, seed)?,
        })
    }

    /// Records of the state after local `noise` (not inverted later).
    pub fn sample_noisy_state(&self, povm: &Povm, noise: &NoiseModel, count: usize, seed: u64) -> Result<ShadowEnsemble, CliError> {
        Ok(match self {
            BuiltState::Mps(m) => sample_noisy_state(m, povm, noise, count, seed)?,
            BuiltState::Dense(d) => sample_noisy_state(d, povm, noise, count, seed)?,
        })
    }
}

/// Observable sets: `pairs0` (⟨z_0 z_j⟩), `all-pairs` (every ⟨z_i z_j⟩), or an
/// explicit `;`-separated list such as `z0 z1; x0 x2`.
pub fn observables(spec: &str, n: usize) -> Result<Vec<PauliObservable>, CliError> {
    let pairs = |all: bool| {
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if all || i == 0 {
                    out.push(PauliObservable::two_point(i, j, PauliAxis::Z)?);
                }
            }
        }
        Ok::<_, CliError>(out)
    };
    let out = match spec.trim() {
        "pairs0" => pairs(false)?,
        "all-pairs" => pairs(true)?,
        list => list
            .split(';')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.parse::<PauliObservable>().map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?,
    };
    if out.is_empty() {
        return Err(CliError::Config(format!("observable set `{spec}` is empty")));
    }
    for o in &out {
        if o.max_site() >= n {
            return Err(CliError::Config(format!("observable `{o}` acts outside {n} qubits")));
        }
    }
    Ok(out)
}

/// Loads a built-in POVM by name or a JSON POVM file by path.
pub fn load_povm(name: &str) -> Result<Povm, CliError> {
    match builtin_povm(name) {
        Ok(p) => Ok(p),
        Err(_) if Path::new(name).exists() => {
            let text = std::fs::read_to_string(name)
                .map_err(|e| CliError::Config(format!("cannot read {name}: {e}")))?;
            Ok(Povm::from_json(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}

/// Everything an experiment needs. Unset fields take per-experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub experiment: Option<String>,
    pub povm: Option<String>,
    /// POVMs compared by `max-error-scaling`.
    pub povms: Option<Vec<String>>,
    pub state: Option<StateSpec>,
    /// Noise spec, e.g. `depolarizing:0.2` or `ad:0.1`.
    pub noise: Option<String>,
    /// Depolarizing `p` values for `ghz-correlators`.
    pub noise_grid: Option<Vec<f64>>,
    pub samples: Option<usize>,
    /// Sample counts for `max-error-scaling` and `fidelity`.
    pub sample_grid: Option<Vec<usize>>,
    /// Qubit counts for `fidelity`.
    pub sizes: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub observables: Option<String>,
    pub out: Option<PathBuf>,
}

fn version() -> u32 {
    CONFIG_VERSION
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: ExperimentConfig) -> Self {
        Self {
            version: self.version,
            experiment: over.experiment.or(self.experiment),
            povm: over.povm.or(self.povm),
            povms: over.povms.or(self.povms),
            state: over.state.or(self.state),
            noise: over.noise.or(self.noise),
            noise_grid: over.noise_grid.or(self.noise_grid),
            samples: over.samples.or(self.samples),
            sample_grid: over.sample_grid.or(self.sample_grid),
            sizes: over.sizes.or(self.sizes),
            runs: over.runs.or(self.runs),
            seed: over.seed.or(self.seed),
            observables: over.observables.or(self.observables),
            out: over.out.or(self.out),
        }
    }

    pub fn samples_or(&self, default: usize) -> Result<usize, CliError> {
        let n = self.samples.unwrap_or(default);
        if n == 0 {
            return Err(CliError::Config("the number of samples must be at least 1".into()));
        }
        Ok(n)
    }

    pub fn runs_or(&self, default: usize) -> Result<usize, CliError> {
        let r = self.runs.unwrap_or(default);
        if r == 0 {
            return Err(CliError::Config("the number of runs must be at least 1".into()));
        }
        Ok(r)
    }

    pub fn sample_grid_or(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let grid = self.sample_grid.clone().unwrap_or_else(|| default.to_vec());
        if grid.is_empty() || grid.contains(&0) {
            return Err(CliError::Config("sample grid entries must be at least 1".into()));
        }
        Ok(grid)
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>, CliError> {
        match &self.noise {
            Some(s) => Ok(NoiseModel::parse(s)?),
            None => Ok(None),
        }
    }
}
