//! `decoyrate` — finite-key security analysis for decoy-state BB84 with
//! asymmetric basis detector efficiencies.

use std::io::Read;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use decoyrate_cli::{
    compare_reports, config::FileConfig, emit_counts, exit, optimize_record, parse_config,
    parse_counts_str, rate_record, rate_table, Record, SWEEP_HEADER,
};
use decoyrate_core::{
    key_rate, ChernoffArg, CountsTable, EnginePolicy, MinPolicy, ProtocolConfig, SystemModel,
    ThetaLogBase, Variant,
};
use decoyrate_opt::{optimize, SearchOptions};
use decoyrate_sim::{expected_counts, sample_counts, SimOptions};

#[derive(Parser)]
#[command(
    name = "decoyrate",
    version,
    about = "Finite-key rates, channel simulation and parameter search \
             for decoy-state BB84 with asymmetric detector efficiencies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Policy switches shared by the analysis subcommands.
#[derive(Args, Debug, Clone, Copy)]
struct PolicyArgs {
    /// Confidence-interval argument convention.
    #[arg(long, value_parser = parse_chernoff_arg, default_value_t)]
    chernoff_arg: ChernoffArg,
    /// Logarithm base of the phase-error correction term.
    #[arg(long, value_parser = parse_theta_log_base, default_value_t)]
    theta_log_base: ThetaLogBase,
    /// Worst-case strategy over the vacuum-yield rectangle.
    #[arg(long, value_parser = parse_min_policy, default_value_t)]
    min_policy: MinPolicy,
}

impl PolicyArgs {
    fn policy(&self) -> EnginePolicy {
        EnginePolicy {
            chernoff_arg: self.chernoff_arg,
            theta_log_base: self.theta_log_base,
            min_policy: self.min_policy,
        }
    }
}

/// Detector-efficiency overrides shared by all subcommands.
#[derive(Args, Debug, Clone, Copy)]
struct EtaArgs {
    /// Override the Z-basis detector efficiency.
    #[arg(long)]
    eta_z: Option<f64>,
    /// Override the X-basis detector efficiency.
    #[arg(long)]
    eta_x: Option<f64>,
}

impl EtaArgs {
    fn apply(&self, sys: &mut SystemModel) {
        if let Some(eta_z) = self.eta_z {
            sys.eta_z = eta_z;
        }
        if let Some(eta_x) = self.eta_x {
            sys.eta_x = eta_x;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case secret-key rate from observed counts.
    Rate {
        /// Config file with [system] and [protocol] sections.
        #[arg(long)]
        config: PathBuf,
        /// Counts CSV (`-` reads standard input).
        #[arg(long)]
        counts: PathBuf,
        #[command(flatten)]
        eta: EtaArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Exit with code 3 when the computed rate is zero.
        #[arg(long)]
        strict: bool,
        /// Write the machine-readable record here (human table still
        /// prints to standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected or Poisson-sampled counts from the channel model.
    Simulate {
        /// Config file with [system] and [protocol] sections.
        #[arg(long)]
        config: PathBuf,
        /// Override the configured fiber length (km).
        #[arg(long)]
        distance: Option<f64>,
        #[command(flatten)]
        eta: EtaArgs,
        /// Sample a finite realization with this seed (omit for the
        /// noise-free expected counts).
        #[arg(long)]
        seed: Option<u64>,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search protocol parameters maximizing the worst-case rate.
    Optimize {
        /// Optional config file providing the [system] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fiber length in km.
        #[arg(long)]
        distance: f64,
        /// Protocol variant to optimize.
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
        /// Seed for the randomized restarts.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Randomized restarts on top of the deterministic warm starts.
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[command(flatten)]
        eta: EtaArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Write the machine-readable record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimized rate of every variant across a distance range (CSV).
    Sweep {
        /// Optional config file providing the [system] section.
        #[arg(long)]
        config: Option<PathBuf>,
        /// First distance (km).
        #[arg(long)]
        from: f64,
        /// Last distance (km), inclusive.
        #[arg(long)]
        to: f64,
        /// Distance step (km).
        #[arg(long)]
        step: f64,
        /// Seed for the randomized restarts.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Randomized restarts on top of the deterministic warm starts.
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[command(flatten)]
        eta: EtaArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ratio table between two rate records.
    Compare {
        /// First record file (numerator).
        first: PathBuf,
        /// Second record file (denominator).
        second: PathBuf,
        /// Write the machine-readable ratio record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_chernoff_arg(s: &str) -> Result<ChernoffArg, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_theta_log_base(s: &str) -> Result<ThetaLogBase, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_min_policy(s: &str) -> Result<MinPolicy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// Failures mapped to exit codes 2 and 3.
enum RunError {
    /// Unusable input data or violated invariant.
    Data(String),
    /// `--strict` rate evaluation produced no key.
    ZeroKey,
}

fn data_err(e: impl std::fmt::Display) -> RunError {
    RunError::Data(e.to_string())
}

fn load_config(path: &Path) -> Result<FileConfig, RunError> {
    parse_config(path).map_err(data_err)
}

fn load_system(
    config: Option<&PathBuf>,
    eta: &EtaArgs,
) -> Result<(SystemModel, SimOptions), RunError> {
    let (mut sys, sim) = match config {
        Some(path) => {
            let file = load_config(path)?;
            (file.system, file.sim)
        }
        None => (SystemModel::default(), SimOptions::default()),
    };
    eta.apply(&mut sys);
    sys.validate().map_err(data_err)?;
    Ok((sys, sim))
}

fn read_counts(path: &Path) -> Result<CountsTable, RunError> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(data_err)?;
        parse_counts_str(&text).map_err(data_err)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| {
            data_err(format!("cannot read {}: {e}", path.display()))
        })?;
        parse_counts_str(&text).map_err(data_err)
    }
}

fn write_out(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text)
        .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn protocol_from(file: &FileConfig, path: &Path) -> Result<ProtocolConfig, RunError> {
    file.protocol.clone().ok_or_else(|| {
        data_err(format!(
            "{}: missing required section [protocol]",
            path.display()
        ))
    })
}

fn cmd_rate(
    config: &Path,
    counts_path: &Path,
    eta: &EtaArgs,
    policy: EnginePolicy,
    strict: bool,
    out: Option<&Path>,
) -> Result<(), RunError> {
    let file = load_config(config)?;
    let mut sys = file.system.clone();
    eta.apply(&mut sys);
    sys.validate().map_err(data_err)?;
    let cfg = protocol_from(&file, config)?;
    let counts = read_counts(counts_path)?;
    let report = key_rate(&counts, &cfg, &sys, policy).map_err(data_err)?;
    let record = rate_record(&report, &cfg, &sys, policy);
    print!("{}", rate_table(&report, &cfg, &sys));
    println!();
    print!("{}", record.emit());
    if let Some(path) = out {
        write_out(path, &record.emit())?;
    }
    if strict && report.rate <= 0.0 {
        return Err(RunError::ZeroKey);
    }
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    distance: Option<f64>,
    eta: &EtaArgs,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), RunError> {
    let file = load_config(config)?;
    let mut sys = file.system.clone();
    eta.apply(&mut sys);
    sys.validate().map_err(data_err)?;
    let mut cfg = protocol_from(&file, config)?;
    if let Some(d) = distance {
        cfg.distance_km = d;
    }
    let expected = expected_counts(&sys, &cfg, &file.sim).map_err(data_err)?;
    let table = match seed {
        Some(seed) => sample_counts(&expected, seed),
        None => expected.to_counts_table().map_err(data_err)?,
    };
    let csv = emit_counts(&table);
    match out {
        Some(path) => write_out(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    config: Option<&PathBuf>,
    distance: f64,
    variant: Variant,
    seed: u64,
    restarts: usize,
    eta: &EtaArgs,
    policy: EnginePolicy,
    out: Option<&Path>,
) -> Result<(), RunError> {
    let (sys, sim) = load_system(config, eta)?;
    let opts = SearchOptions {
        restarts,
        policy,
        sim,
        ..SearchOptions::default()
    };
    let result = optimize(&sys, distance, variant, seed, &opts).map_err(data_err)?;
    let record = optimize_record(
        &result.best,
        &sys,
        result.best_rate,
        seed,
        result.restarts,
        result.converged,
        policy,
    );
    print!("{}", record.emit());
    if let Some(path) = out {
        write_out(path, &record.emit())?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: Option<&PathBuf>,
    from: f64,
    to: f64,
    step: f64,
    seed: u64,
    restarts: usize,
    eta: &EtaArgs,
    policy: EnginePolicy,
    out: Option<&Path>,
) -> Result<(), RunError> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) || step <= 0.0 || to < from {
        return Err(data_err(format!(
            "sweep range must satisfy from <= to with step > 0 (got from {from}, to {to}, step {step})"
        )));
    }
    let (sys, sim) = load_system(config, eta)?;
    let opts = SearchOptions {
        restarts,
        policy,
        sim,
        ..SearchOptions::default()
    };
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    let steps = ((to - from) / step).round() as usize;
    for i in 0..=steps {
        let distance = from + step * i as f64;
        if distance > to + 1e-9 {
            break;
        }
        for variant in [
            Variant::FourIntensity,
            Variant::ThreeIntensityAsym,
            Variant::ThreeIntensitySym,
        ] {
            let result = optimize(&sys, distance, variant, seed, &opts).map_err(data_err)?;
            csv.push_str(&format!(
                "{distance},{variant},{},{}\n",
                result.best_rate,
                result.best_rate * sys.clock_hz
            ));
        }
    }
    match out {
        Some(path) => write_out(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_compare(first: &Path, second: &Path, out: Option<&Path>) -> Result<(), RunError> {
    let read = |path: &Path| -> Result<Record, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            data_err(format!("cannot read {}: {e}", path.display()))
        })?;
        Record::parse(&text).map_err(data_err)
    };
    let a = read(first)?;
    let b = read(second)?;
    let (table, record) = compare_reports(&a, &b).map_err(data_err)?;
    print!("{table}");
    println!();
    print!("{}", record.emit());
    if let Some(path) = out {
        write_out(path, &record.emit())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Rate {
            config,
            counts,
            eta,
            policy,
            strict,
            out,
        } => cmd_rate(config, counts, eta, policy.policy(), *strict, out.as_deref()),
        Command::Simulate {
            config,
            distance,
            eta,
            seed,
            out,
        } => cmd_simulate(config, *distance, eta, *seed, out.as_deref()),
        Command::Optimize {
            config,
            distance,
            variant,
            seed,
            restarts,
            eta,
            policy,
            out,
        } => cmd_optimize(
            config.as_ref(),
            *distance,
            *variant,
            *seed,
            *restarts,
            eta,
            policy.policy(),
            out.as_deref(),
        ),
        Command::Sweep {
            config,
            from,
            to,
            step,
            seed,
            restarts,
            eta,
            policy,
            out,
        } => cmd_sweep(
            config.as_ref(),
            *from,
            *to,
            *step,
            *seed,
            *restarts,
            eta,
            policy.policy(),
            out.as_deref(),
        ),
        Command::Compare { first, second, out } => {
            cmd_compare(first, second, out.as_deref())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => std::process::exit(exit::OK),
        Err(RunError::ZeroKey) => {
            eprintln!("no secret key at the configured confidence (rate = 0)");
            std::process::exit(exit::ZERO_KEY);
        }
        Err(RunError::Data(message)) => {
            eprintln!("error: {message}");
            std::process::exit(exit::DATA);
        }
    }
}
