mod commands;
mod manifest;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::commands::ConcentrationArgs;
use crate::manifest::RunManifest;

pub const DEFAULT_MAX_STATES: usize = 2_000_000;

const EXIT_OTHER: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_FAIL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pjmp",
    version,
    about = "Stationary laws, spectral gaps and certificates for spiking jump networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Model description (JSON).
    model: PathBuf,
    /// Directory for `<command>.json` and CSV tables; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct ChainArgs {
    /// Truncation level; defaults to the drift level m at `--alpha`.
    #[arg(long)]
    pub m_box: Option<f64>,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
    /// Writes the truncated generator as MatrixMarket.
    #[arg(long)]
    pub export_generator: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulates one path and Monte Carlo estimators.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        t: f64,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial potentials, comma separated; origin by default.
        #[arg(long, value_delimiter = ',')]
        x0: Vec<f64>,
    },
    /// Stationary distribution of the truncated chain.
    Stationary {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Spectral gap and optimal Poincaré constant.
    Gap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Checks the drift inequality on every enumerated state.
    VerifyLyapunov {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Checks the Poincaré inequality on random functions and the path bound.
    VerifyPoincare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Concentration certificate and tail comparison for the total potential.
    Concentration {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = pjmp::certificates::DEFAULT_MARGIN)]
        lambda_margin: f64,
        #[arg(long, value_delimiter = ',')]
        r_grid: Vec<f64>,
        /// Use the path-method constant instead of the optimal one.
        #[arg(long)]
        path_c0: bool,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Weighted semigroup Poincaré constants on a time grid.
    SemigroupReport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, value_delimiter = ',')]
        t_grid: Vec<f64>,
        #[arg(long)]
        inner_box: Option<f64>,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<pjmp::Error> for CliError {
    fn from(e: pjmp::Error) -> Self {
        use pjmp::Error as E;
        let code = match &e {
            E::IndexOutOfRange { .. }
            | E::InvalidParameter(_)
            | E::InvalidModel(_)
            | E::Json(_) => EXIT_USAGE,
            E::StateCapExceeded { .. } => EXIT_USAGE,
            E::MultipleClosedClasses { .. } | E::DegenerateSupport(_) | E::Inadmissible { .. } => {
                EXIT_DEGENERATE
            }
            E::HypothesisViolated { .. } => EXIT_FAIL,
            E::Io(_) => EXIT_OTHER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}

pub struct Outcome {
    report: Value,
    csv: Vec<(String, String)>,
    verdict: Option<bool>,
}

impl Outcome {
    pub fn new(report: Value) -> Self {
        Self {
            report,
            csv: Vec::new(),
            verdict: None,
        }
    }

    pub fn with_csv(mut self, name: &str, body: String) -> Self {
        self.csv.push((name.to_string(), body));
        self
    }

    pub fn verdict(mut self, pass: bool) -> Self {
        self.verdict = Some(pass);
        self
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate { .. } => "simulate",
        Command::Stationary { .. } => "stationary",
        Command::Gap { .. } => "gap",
        Command::VerifyLyapunov { .. } => "verify-lyapunov",
        Command::VerifyPoincare { .. } => "verify-poincare",
        Command::Concentration { .. } => "concentration",
        Command::SemigroupReport { .. } => "semigroup-report",
    }
}

fn common(c: &Command) -> &Common {
    match c {
        Command::Simulate { common, .. }
        | Command::Stationary { common, .. }
        | Command::Gap { common, .. }
        | Command::VerifyLyapunov { common, .. }
        | Command::VerifyPoincare { common, .. }
        | Command::Concentration { common, .. }
        | Command::SemigroupReport { common, .. } => common,
    }
}

fn dispatch(
    cmd: &Command,
    manifest: &mut RunManifest,
    net: &pjmp::SynapticNetwork,
) -> Result<Outcome, CliError> {
    match cmd {
        Command::Simulate {
            t,
            replicas,
            seed,
            x0,
            ..
        } => commands::simulate(net, manifest, *t, *replicas, *seed, x0),
        Command::Stationary { chain, .. } => commands::stationary_cmd(net, manifest, chain),
        Command::Gap { chain, .. } => commands::gap_cmd(net, manifest, chain),
        Command::VerifyLyapunov { chain, .. } => commands::verify_lyapunov(net, manifest, chain),
        Command::VerifyPoincare {
            chain,
            samples,
            seed,
            ..
        } => commands::verify_poincare(net, manifest, chain, *samples, *seed),
        Command::Concentration {
            chain,
            lambda_margin,
            r_grid,
            path_c0,
            tol,
            ..
        } => {
            let r_grid = if r_grid.is_empty() {
                (1..=12).map(f64::from).collect()
            } else {
                r_grid.clone()
            };
            let opts = ConcentrationArgs {
                margin: *lambda_margin,
                r_grid,
                use_path_c0: *path_c0,
                tol: *tol,
            };
            commands::concentration(net, manifest, chain, &opts)
        }
        Command::SemigroupReport {
            chain,
            t_grid,
            inner_box,
            eps,
            seed,
            ..
        } => commands::semigroup_report(net, manifest, chain, t_grid, *inner_box, *eps, *seed),
    }
}

fn emit(
    out: Option<&PathBuf>,
    name: &str,
    mut report: Value,
    manifest: &RunManifest,
    csv: &[(String, String)],
) -> Result<(), CliError> {
    if let Value::Object(map) = &mut report {
        map.insert("manifest".into(), manifest.to_value());
    }
    let text = format!(
        "{}\n",
        serde_json::to_string_pretty(&report).map_err(pjmp::Error::from)?
    );
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{name}.json")), text)?;
            for (file, body) in csv {
                fs::write(dir.join(file), body)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let name = command_name(&cli.command);
    let common = common(&cli.command).clone();
    let (text, net) = commands::read_model(&common.model)?;
    let mut manifest = RunManifest::new(name, &common.model.display().to_string(), &text);
    match dispatch(&cli.command, &mut manifest, &net) {
        Ok(outcome) => {
            emit(
                common.out.as_ref(),
                name,
                outcome.report,
                &manifest,
                &outcome.csv,
            )?;
            Ok(match outcome.verdict {
                Some(false) => EXIT_FAIL,
                _ => 0,
            })
        }
        Err(e) if e.code == EXIT_DEGENERATE => {
            let report =
                serde_json::json!({ "command": name, "status": "degenerate", "reason": e.message });
            emit(common.out.as_ref(), name, report, &manifest, &[])?;
            eprintln!("pjmp: {}", e.message);
            Ok(EXIT_DEGENERATE)
        }
        Err(e) => Err(e),
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("PJMP_THREADS") {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::usage(format!(
                "PJMP_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError {
                code: EXIT_OTHER,
                message: e.to_string(),
            })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match configure_threads().and_then(|_| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pjmp: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
