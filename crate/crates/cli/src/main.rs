//! `icshadow`: classical shadow experiments from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod config;
mod experiments;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icshadow::channel::measurement_channel;
use icshadow::estimator::{write_results_csv, ResultRow};
use icshadow::{
    bound_constant, estimate, validate_povm, EstimatorMethod, NoiseModel, SampleBudget,
    ShadowEnsemble, SnapshotRule,
};
use serde::Serialize;

use config::{load_povm, observables, ExperimentConfig, StateSpec};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl From<icshadow::Error> for CliError {
    fn from(e: icshadow::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

const SCALE_NOTE: &str = "Ground states are computed by exact diagonalization, so \
tfim and heisenberg states are limited to 12 sites. Larger states can be imported as \
MPS tensors with --state mps:<file.json>.";

#[derive(Parser)]
#[command(name = "icshadow", version, about = "Classical shadows with informationally complete POVMs", after_help = SCALE_NOTE)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Values given here override the config file.
#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// POVM name (pauli6, pauli4, tetra) or JSON file.
    #[arg(long, global = true)]
    povm: Option<String>,
    /// ghz:<n>, product:<n>:<axis><sign>, tfim:<J>:<h>:<n>, heisenberg:<seed>:<n> or mps:<file>.
    #[arg(long, global = true)]
    state: Option<String>,
    /// none, depolarizing:<q>, depol-p:<p>, amplitude_damping:<γ> or kraus:<json>.
    #[arg(long, global = true)]
    noise: Option<String>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Base seed; run r of grid point g uses a fixed offset from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; CSV goes to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write the resolved configuration to this TOML file.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check POVM invariants and informational completeness.
    ValidatePovm,
    /// Draw measurement records and save them.
    Sample {
        /// Treat --noise as part of the state instead of the measurement.
        #[arg(long)]
        noisy_state: bool,
    },
    /// Predict observables from saved records.
    Estimate {
        #[arg(long)]
        records: PathBuf,
        /// pairs0, all-pairs, or a list such as "z0 z1; x0 x2".
        #[arg(long, default_value = "pairs0")]
        observables: String,
        /// mean, mom (default batch count) or mom:<batches>.
        #[arg(long, default_value = "mean")]
        method: String,
        /// Failure probability for the default median-of-means batch count.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Samples needed for L observables of locality k to accuracy ε with probability 1-δ.
    PlanSamples {
        #[arg(short, long)]
        k: usize,
        #[arg(short = 'l', long)]
        count: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Two-point functions of a GHZ state under depolarizing noise.
    GhzCorrelators {
        /// Use every pair instead of (0, j).
        #[arg(long)]
        all_pairs: bool,
        /// Comma-separated depolarizing p values.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<f64>>,
    },
    /// Maximum error over all pairs against the number of samples.
    MaxErrorScaling {
        /// Comma-separated POVM names.
        #[arg(long, value_delimiter = ',')]
        povms: Option<Vec<String>>,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
    /// Transverse-field Ising ground-state correlations.
    Ising,
    /// Disordered Heisenberg ground-state correlations and singlet pairs.
    Heisenberg,
    /// Raw and projected GHZ fidelities.
    Fidelity {
        /// Comma-separated qubit counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma-separated sample counts.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<usize>>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ValidatePovm => "validate-povm",
            Command::Sample { .. } => "sample",
            Command::Estimate { .. } => "estimate",
            Command::PlanSamples { .. } => "plan-samples",
            Command::GhzCorrelators { .. } => "ghz-correlators",
            Command::MaxErrorScaling { .. } => "max-error-scaling",
            Command::Ising => "ising",
            Command::Heisenberg => "heisenberg",
            Command::Fidelity { .. } => "fidelity",
        }
    }
}

fn resolve(common: &Common, command: &Command) -> Result<ExperimentConfig, CliError> {
    let file = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig { version: config::CONFIG_VERSION, ..Default::default() },
    };
    if let Some(e) = &file.experiment {
        if e != command.name() {
            return Err(CliError::Config(format!(
                "config is for `{e}` but the subcommand is `{}`",
                command.name()
            )));
        }
    }
    let mut over = ExperimentConfig {
        povm: common.povm.clone(),
        state: common.state.as_deref().map(str::parse::<StateSpec>).transpose()?,
        noise: common.noise.clone(),
        samples: common.samples,
        runs: common.runs,
        seed: common.seed,
        out: common.out.clone(),
        ..Default::default()
    };
    match command {
        Command::GhzCorrelators { all_pairs, p } => {
            over.noise_grid = p.clone();
            if *all_pairs {
                over.observables = Some("all-pairs".into());
            }
        }
        Command::MaxErrorScaling { povms, grid } => {
            over.povms = povms.clone();
            over.sample_grid = grid.clone();
        }
        Command::Fidelity { sizes, grid } => {
            over.sizes = sizes.clone();
            over.sample_grid = grid.clone();
        }
        _ => {}
    }
    let cfg = file.overlay(over);
    if let Some(n) = &cfg.noise {
        NoiseModel::parse(n)?;
    }
    Ok(cfg)
}

/// Writes through a temporary file in the target directory, so a failed run
/// never leaves a partial output behind.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<(), CliError>) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit_csv<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<(), CliError> {
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        let mut csv = csv::Writer::from_writer(w);
        for r in rows {
            csv.serialize(r).map_err(|e| CliError::Config(e.to_string()))?;
        }
        csv.flush().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    };
    match out {
        Some(p) => write_atomic(p, write),
        None => write(&mut std::io::stdout().lock()),
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let name = cfg.povm.as_deref().unwrap_or("pauli6");
    let povm = load_povm(name)?;
    let report = validate_povm(&povm);
    println!("povm {} with {} elements", povm.name(), povm.k());
    for v in &report {
        println!("  violation: {v}");
    }
    if !report.is_empty() {
        return Err(CliError::Config(format!("{} invariant violation(s)", report.len())));
    }
    let noise = cfg.noise_model()?;
    let ch = measurement_channel(&povm, SnapshotRule::Limit, noise.as_ref())?;
    println!("valid and informationally complete");
    let table = ch.factor_table();
    println!("max |Φ| = {:.6}, B(k=1) = {:.6}", table.max_abs_factor(), bound_constant(&table, 1));
    if let Some(out) = &cfg.out {
        let json = povm.to_json()?;
        write_atomic(out, |w| w.write_all(json.as_bytes()).map_err(|e| CliError::Config(e.to_string())))?;
    }
    Ok(())
}

fn sample_records(cfg: &ExperimentConfig, noisy_state: bool) -> Result<(), CliError> {
    let spec = cfg
        .state
        .clone()
        .ok_or_else(|| CliError::Config("sample needs --state".into()))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("sample needs --out".into()))?;
    let samples = cfg.samples_or(1000)?;
    let povm = load_povm(cfg.povm.as_deref().unwrap_or("pauli6"))?;
    let noise = cfg.noise_model()?;
    spec.check()?;
    let state = spec.build()?;
    let seed = cfg.seed.unwrap_or(1);
    let e = match (&noise, noisy_state) {
        (Some(n), true) => state.sample_noisy_state(&povm, n, samples, seed)?,
        _ => state.sample(&povm, noise.as_ref(), samples, seed)?,
    };
    let csv = out.extension().is_some_and(|x| x == "csv");
    write_atomic(&out, |w| {
        if csv {
            e.write_csv(w)?;
        } else {
            e.write_to(w)?;
        }
        Ok(())
    })?;
    eprintln!("{} records of {} qubits written to {}", e.len(), e.num_qubits(), out.display());
    Ok(())
}

fn parse_method(text: &str, observables: usize, delta: f64) -> Result<EstimatorMethod, CliError> {
    match text {
        "mean" => Ok(EstimatorMethod::Mean),
        "mom" => Ok(EstimatorMethod::default_median_of_means(observables, delta)?),
        other => {
            let batches = other
                .strip_prefix("mom:")
                .and_then(|b| b.parse().ok())
                .ok_or_else(|| CliError::Config(format!("unknown method `{other}`")))?;
            Ok(EstimatorMethod::MedianOfMeans { batches })
        }
    }
}

fn estimate_records(cfg: &ExperimentConfig, records: &Path, obs_spec: &str, method: &str, delta: f64) -> Result<(), CliError> {
    let e = ShadowEnsemble::load(records)?;
    let povm = load_povm(cfg.povm.as_deref().unwrap_or(e.povm()))?;
    let noise = match e.noise() {
        Some(n) => NoiseModel::parse(n)?,
        None => None,
    };
    let ch = measurement_channel(&povm, SnapshotRule::Limit, noise.as_ref())?;
    let table = ch.factor_table();
    let obs = observables(obs_spec, e.num_qubits())?;
    let method = parse_method(method, obs.len(), delta)?;
    let state = cfg.state.as_ref().map(|s| s.build()).transpose()?;
    let rows = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let est = estimate(&e, o, &table, method)?;
            let truth = state.as_ref().map(|s| s.exact(o)).transpose()?;
            Ok(ResultRow::new(i, o, method, &est, truth))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let write = |w: &mut dyn Write| Ok(write_results_csv(&rows, w)?);
    match &cfg.out {
        Some(p) => write_atomic(p, write),
        None => write(&mut std::io::stdout().lock()),
    }
}

#[derive(Serialize)]
struct Plan {
    povm: String,
    #[serde(flatten)]
    budget: SampleBudget,
}

fn plan(cfg: &ExperimentConfig, k: usize, count: usize, epsilon: f64, delta: f64) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Config("locality k must be at least 1".into()));
    }
    let povm = cfg.povm.clone().unwrap_or_else(|| "pauli6".into());
    let ch = measurement_channel(&load_povm(&povm)?, SnapshotRule::Limit, cfg.noise_model()?.as_ref())?;
    let budget = SampleBudget::for_table(&ch.factor_table(), k, count, epsilon, delta)?;
    // B is a product of squared factors; drop the rounding noise
    println!("B = {}", (budget.b * 1e9).round() / 1e9);
    println!("N = {}", budget.n);
    if let Some(out) = &cfg.out {
        let json = serde_json::to_string_pretty(&Plan { povm, budget }).map_err(|e| CliError::Config(e.to_string()))?;
        write_atomic(out, |w| w.write_all(json.as_bytes()).map_err(|e| CliError::Config(e.to_string())))?;
    }
    Ok(())
}

fn pair_of(obs: &str) -> Option<(usize, usize)> {
    let sites: Vec<usize> = obs
        .split_whitespace()
        .map(|t| t[1..].parse().ok())
        .collect::<Option<_>>()?;
    match sites.as_slice() {
        [i, j] => Some((*i, *j)),
        _ => None,
    }
}

fn summarize_ground_states(rows: &[experiments::GroundStateRow], singlets: bool) {
    let mut regimes: Vec<&str> = rows.iter().map(|r| r.regime.as_str()).collect();
    regimes.dedup();
    for regime in regimes {
        let rs: Vec<_> = rows.iter().filter(|r| r.regime == regime).collect();
        let worst = rs.iter().map(|r| r.abs_error).fold(0.0, f64::max);
        let from_zero: Vec<(f64, f64)> = rs
            .iter()
            .filter_map(|r| match pair_of(&r.observable) {
                Some((0, j)) => Some((j as f64, r.truth)),
                _ => None,
            })
            .collect();
        eprintln!(
            "{regime}: max |error| = {worst:.4}, decay rate of |⟨z0 zj⟩| = {:.4}",
            experiments::decay_rate(&from_zero)
        );
        if singlets {
            let n = rs
                .iter()
                .filter_map(|r| pair_of(&r.observable))
                .map(|(_, j)| j + 1)
                .max()
                .unwrap_or(0);
            let pick = |f: fn(&experiments::GroundStateRow) -> f64| {
                let c: Vec<_> = rs.iter().filter_map(|r| pair_of(&r.observable).map(|p| (p, f(r)))).collect();
                experiments::singlet_pairs(n, &c)
            };
            eprintln!("singlets (exact):   {:?}", pick(|r| r.truth));
            eprintln!("singlets (shadows): {:?}", pick(|r| r.estimate));
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = resolve(&cli.common, &cli.command)?;
    if let Some(path) = &cli.common.save_config {
        cfg.experiment = Some(cli.command.name().into());
        let text = cfg.to_toml();
        write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::Config(e.to_string())))?;
    }
    let out = cfg.out.clone();
    match cli.command {
        Command::ValidatePovm => validate(&cfg),
        Command::Sample { noisy_state } => sample_records(&cfg, noisy_state),
        Command::Estimate { records, observables, method, delta } => {
            estimate_records(&cfg, &records, &observables, &method, delta)
        }
        Command::PlanSamples { k, count, epsilon, delta } => plan(&cfg, k, count, epsilon, delta),
        Command::GhzCorrelators { .. } => emit_csv(&experiments::ghz_correlators(&cfg)?, out.as_deref()),
        Command::MaxErrorScaling { .. } => emit_csv(&experiments::max_error_scaling(&cfg)?, out.as_deref()),
        Command::Ising => {
            let rows = experiments::ising(&cfg)?;
            summarize_ground_states(&rows, false);
            emit_csv(&rows, out.as_deref())
        }
        Command::Heisenberg => {
            let rows = experiments::heisenberg(&cfg)?;
            summarize_ground_states(&rows, true);
            emit_csv(&rows, out.as_deref())
        }
        Command::Fidelity { .. } => emit_csv(&experiments::fidelity(&cfg)?, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(p) => p,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icshadow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
