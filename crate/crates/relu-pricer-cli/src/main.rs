//! `relu-pricer`: build, evaluate, verify and study price networks.
//!
//! Exit codes: 0 success, 1 failed verification or numerical failure,
//! 2 configuration error, 3 size budget exceeded, 4 I/O or artifact error.

mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use relu_pricer::network::{read_json, write_json};
use relu_pricer::oracle::{sup_error_report, ApproxReport, PriceOracle};
use relu_pricer::pricing::{size_budget_with, synthesize, PriceOptions, Variant};
use relu_pricer::primitives::{mult_net, product_net, square_net};
use relu_pricer::{Error, NeuralNetwork};

use config::{ConfigError, PrimitiveArg, Settings};

#[derive(Parser, Debug)]
#[command(name = "relu-pricer", version, about = "Constructive ReLU networks for maximum option prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a price network and write it with its manifest.
    Build(Opts),
    /// Print the realization of a network at one point.
    Eval(Opts),
    /// Compare a primitive or price network against its reference.
    Verify(Opts),
    /// Tabulate sizes and errors over lists of dimensions and tolerances.
    ScaleStudy(Opts),
    /// Re-emit a network file.
    Export(Opts),
}

#[derive(Args, Debug)]
struct Opts {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Debug)]
enum Failure {
    Verification(String),
    Numerical(String),
    Config(String),
    Budget(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Verification(_) | Self::Numerical(_) => 1,
            Self::Config(_) => 2,
            Self::Budget(_) => 3,
            Self::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Verification(m) | Self::Numerical(m) | Self::Config(m) | Self::Budget(m) | Self::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid(m) => Self::Config(m),
            ConfigError::Io(m) => Self::Io(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { predicted_m, predicted_l, budget } => Self::Budget(
                serde_json::json!({
                    "error": "budget_exceeded",
                    "predicted_m": predicted_m,
                    "predicted_l": predicted_l,
                    "budget": budget,
                })
                .to_string(),
            ),
            Error::ParseError(_) | Error::SchemaVersionMismatch { .. } => Self::Io(e.to_string()),
            Error::ConvergenceFailure(_) | Error::Overflow(_) | Error::OracleRangeViolation { .. } => {
                Self::Numerical(e.to_string())
            }
            other => Self::Config(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_network(path: &Path) -> Result<NeuralNetwork, Failure> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_json(BufReader::new(file))?)
}

fn save_network(net: &NeuralNetwork, path: &Path) -> Outcome {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_json(net, &mut w)?;
    w.flush().map_err(|e| io_err(path, e))
}

fn save_text(text: &str, path: &Path) -> Outcome {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn options(s: &Settings) -> PriceOptions {
    PriceOptions { budget: s.budget(), ..PriceOptions::default() }
}

fn build(s: &Settings) -> Outcome {
    let out = s.out()?;
    let params = s.params()?;
    let mut synthesis = synthesize(&params, s.synthesis_mode(), &options(s))?;
    synthesis.manifest.seed = s.seed;
    save_network(&synthesis.network, out)?;
    save_text(&synthesis.manifest.to_json(), &manifest_path(out))?;
    let m = &synthesis.manifest;
    println!("Q={} M={} L={} -> {}", m.q, m.metrics.size, m.metrics.depth, out.display());
    Ok(())
}

fn eval(s: &Settings) -> Outcome {
    let x = s.at()?;
    let net = load_network(s.net()?)?;
    let y = net.realize(&x)?;
    let line: Vec<String> = y.iter().map(f64::to_string).collect();
    println!("{}", line.join(","));
    Ok(())
}

fn verify(s: &Settings) -> Outcome {
    let eps = s.eps();
    let seed = s.seed();
    let report = match s.primitive.unwrap_or(PrimitiveArg::Price) {
        PrimitiveArg::Square => {
            let net = square_net(eps)?;
            sup_error_report(&net, |x| x[0] * x[0], (0.0, 1.0), s.samples.unwrap_or(10_000), seed, eps)?
        }
        PrimitiveArg::Mult => {
            let net = mult_net(eps, 1.0)?;
            sup_error_report(&net, |x| x[0] * x[1], (-1.0, 1.0), s.samples.unwrap_or(10_000), seed, eps)?
        }
        PrimitiveArg::Product => {
            let m = s.d.unwrap_or(3);
            let net = product_net(eps, m, 1.0)?;
            sup_error_report(&net, |x| x.iter().product(), (-1.0, 1.0), s.samples.unwrap_or(10_000), seed, eps)?
        }
        PrimitiveArg::Price => {
            let params = s.params()?;
            let net = match &s.net {
                Some(p) => load_network(p)?,
                None => synthesize(&params, s.synthesis_mode(), &options(s))?.network,
            };
            let (a, b) = params.domain;
            let oracle = PriceOracle::new(&params, a, b)?;
            sup_error_report(&net, |x| oracle.price(x).unwrap_or(f64::NAN), (a, b), s.samples(), seed, eps)?
        }
    };
    let json = report.to_json();
    println!("{json}");
    if let Some(out) = &s.out {
        save_text(&json, out)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!("sup error {} exceeds {}", report.sup_error, report.target_eps)))
    }
}

pub const CSV_HEADER: &str = "d,eps,mode,Q,M,L,sup_error,seconds,ratio";

/// Shortest round-trip text, in exponent form for large magnitudes.
fn num(v: f64) -> String {
    if v.is_finite() && v.abs() >= 1e15 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn ratio(m: f64, d: usize, eps: f64, n: usize) -> f64 {
    let nf = n as f64;
    m / ((d as f64).powf(2.0 + 1.0 / nf) * eps.powf(-1.0 / nf))
}

fn scale_study(s: &Settings) -> Outcome {
    let ds = s.d_list()?;
    let epss = s.eps_list()?;
    let variant = s.variant();
    let mode = match variant {
        Variant::PaperConstants => "paper",
        Variant::Practical => "practical",
    };
    let n = s.n.unwrap_or(1);
    let mut csv = String::new();
    if !s.deterministic() {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let host = std::env::var("HOSTNAME").unwrap_or_default();
        writeln!(csv, "# generated_unix={stamp} host={host}").unwrap();
    }
    writeln!(csv, "{CSV_HEADER}").unwrap();
    let mut failure: Option<Failure> = None;
    for &d in &ds {
        for &eps in &epss {
            let params = s.params_for(d)?;
            let started = Instant::now();
            let (q, m, l, sup) = match variant {
                Variant::PaperConstants => {
                    let b = size_budget_with(&params, eps, variant, &options(s))?;
                    (b.q, b.predicted_m_bound, b.predicted_l_bound, None)
                }
                Variant::Practical => match synthesize(&params, s.synthesis_mode_at(eps), &options(s)) {
                    Ok(syn) => {
                        let (a, b) = params.domain;
                        let oracle = PriceOracle::new(&params, a, b)?;
                        let report: ApproxReport = sup_error_report(
                            &syn.network,
                            |x| oracle.price(x).unwrap_or(f64::NAN),
                            (a, b),
                            s.samples(),
                            s.seed(),
                            eps,
                        )?;
                        if !report.passed && failure.is_none() {
                            failure = Some(Failure::Verification(format!(
                                "d = {d}, eps = {eps}: sup error {}",
                                report.sup_error
                            )));
                        }
                        let mt = &syn.manifest.metrics;
                        (syn.manifest.q as f64, mt.size as f64, mt.depth as f64, Some(report.sup_error))
                    }
                    Err(Error::BudgetExceeded { predicted_m, predicted_l, budget }) => {
                        if failure.is_none() {
                            failure = Some(Error::BudgetExceeded { predicted_m, predicted_l, budget }.into());
                        }
                        (f64::NAN, predicted_m, predicted_l, None)
                    }
                    Err(e) => return Err(e.into()),
                },
            };
            let seconds = if s.deterministic() { String::new() } else { format!("{:.3}", started.elapsed().as_secs_f64()) };
            let q_text = if q.is_nan() { String::new() } else { num(q) };
            let sup_text = sup.map(num).unwrap_or_default();
            let (m_text, l_text, r_text) = (num(m), num(l), num(ratio(m, d, eps, n)));
            writeln!(csv, "{d},{eps},{mode},{q_text},{m_text},{l_text},{sup_text},{seconds},{r_text}").unwrap();
        }
    }
    match &s.out {
        Some(out) => save_text(&csv, out)?,
        None => print!("{csv}"),
    }
    failure.map_or(Ok(()), Err)
}

fn export(s: &Settings) -> Outcome {
    let net = load_network(s.net.as_deref().ok_or_else(|| Failure::Config("--net is required".into()))?)?;
    save_network(&net, s.out()?)
}

fn run(cli: Cli) -> Outcome {
    let (opts, command): (Opts, fn(&Settings) -> Outcome) = match cli.command {
        Command::Build(o) => (o, build),
        Command::Eval(o) => (o, eval),
        Command::Verify(o) => (o, verify),
        Command::ScaleStudy(o) => (o, scale_study),
        Command::Export(o) => (o, export),
    };
    let settings = match &opts.config {
        Some(path) => opts.settings.or(&Settings::from_file(path)?),
        None => opts.settings,
    };
    command(&settings)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
