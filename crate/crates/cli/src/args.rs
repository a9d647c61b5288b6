use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use walkmax::norming::{Regime, Slack, TailClass};
use walkmax::parallel::WORKERS_ENV;
use walkmax::simulate::IndexLaw;
use walkmax::stats::HillThreshold;
use walkmax::StepLaw;

#[derive(Debug, Parser)]
#[command(
    name = "walkmax",
    version,
    about = "Maxima of ensembles of random walks: constants, approximations and simulations",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value file merged under the flags given on the command line
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Write to FILE instead of stdout
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads; never changes the output
    #[arg(long, env = WORKERS_ENV)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Norming constants and the boundary sequences of a tail class
    Constants(ConstantsArgs),
    /// Evaluate a tail approximation for P(S_n > x)
    TailApprox(TailApproxArgs),
    /// Monte Carlo estimate of P(S_n - shift > x)
    McTail(McTailArgs),
    /// Top order statistics of p independent walks
    Maxima(MaximaArgs),
    /// Extremes of the block sums of one walk
    Blocks(BlocksArgs),
    /// Maxima over a random number of walks
    RandomIndex(RandomIndexArgs),
    /// Tail of a centered compound Poisson sum
    RandomSum(RandomSumArgs),
    /// Componentwise maxima of independent multivariate walks
    MvMaxima(MvMaximaArgs),
    /// Hill estimates from a file or from simulated walk sums
    Hill(HillArgs),
    /// Run a named acceptance scenario, or `all`
    Verify(VerifyArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Constants(a) => &a.common,
            Command::TailApprox(a) => &a.common,
            Command::McTail(a) => &a.common,
            Command::Maxima(a) => &a.common,
            Command::Blocks(a) => &a.common,
            Command::RandomIndex(a) => &a.common,
            Command::RandomSum(a) => &a.common,
            Command::MvMaxima(a) => &a.common,
            Command::Hill(a) => &a.common,
            Command::Verify(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub regime: Regime,
    #[arg(long, default_value = "normal")]
    pub law: StepLaw,
    /// Walk length
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Ensemble size
    #[arg(long)]
    pub p: u64,
    /// Tail class for the boundary tables; defaults to the law's own
    #[arg(long)]
    pub class: Option<TailClass>,
    /// `loglog` or a positive constant
    #[arg(long, default_value = "loglog")]
    pub slack: Slack,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Normal,
    Nagaev,
    Subexp,
    Rozovskii,
}

#[derive(Debug, Args)]
pub struct TailApproxArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Step law (not used by `normal` and `rozovskii`)
    #[arg(long, default_value = "normal")]
    pub law: StepLaw,
    /// Lognormal-type tail for `rozovskii`, e.g. `ln:gamma=2,lambda=0.5`
    #[arg(long)]
    pub class: Option<TailClass>,
    #[arg(long)]
    pub n: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct McTailArgs {
    #[arg(long)]
    pub law: StepLaw,
    #[arg(long)]
    pub n: u64,
    /// One or more thresholds, all estimated from the same walks
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    #[arg(long = "R")]
    pub replications: u64,
    #[arg(long)]
    pub seed: u64,
    /// Subtract n E X from the sum
    #[arg(long)]
    pub centered: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub law: StepLaw,
    #[arg(long)]
    pub regime: Regime,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long = "R")]
    pub replications: u64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MaximaArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long)]
    pub p: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BlocksArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Block length
    #[arg(long)]
    pub r: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RandomIndexArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Ensemble size the constants are computed for
    #[arg(long)]
    pub p: u64,
    /// `poisson:MEAN` or `fixed:P`
    #[arg(long, value_parser = parse_index_law)]
    pub index: IndexLaw,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RandomSumArgs {
    #[arg(long)]
    pub law: StepLaw,
    /// Poisson mean lambda(t) of the number of summands
    #[arg(long)]
    pub intensity: f64,
    #[arg(long)]
    pub x: f64,
    #[arg(long = "R")]
    pub replications: u64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MvMaximaArgs {
    /// Component laws; a single law is repeated `d` times
    #[arg(long, required = true, value_delimiter = ';')]
    pub law: Vec<StepLaw>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub p: u64,
    #[arg(long = "R")]
    pub replications: u64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HillVariant {
    /// Divide by the (k+1)-th largest value
    KPlusOne,
    /// Divide by the k-th largest value
    KthLargest,
}

impl From<HillVariant> for HillThreshold {
    fn from(v: HillVariant) -> Self {
        match v {
            HillVariant::KPlusOne => HillThreshold::KPlusOne,
            HillVariant::KthLargest => HillThreshold::KthLargest,
        }
    }
}

#[derive(Debug, Args)]
pub struct HillArgs {
    /// One value per line; otherwise simulate Fréchet-normalized walk sums
    #[arg(long, conflicts_with_all = ["law", "seed"])]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "seed")]
    pub law: Option<StepLaw>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub p: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// One or more k values
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_enum, default_value = "k-plus-one")]
    pub variant: HillVariant,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub scenario: String,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

fn parse_index_law(s: &str) -> Result<IndexLaw, String> {
    let (kind, value) = s
        .split_once(':')
        .ok_or_else(|| format!("expected poisson:MEAN or fixed:P, got `{s}`"))?;
    match kind {
        "poisson" => value
            .parse::<f64>()
            .map(IndexLaw::Poisson)
            .map_err(|e| format!("bad Poisson mean `{value}`: {e}")),
        "fixed" => value
            .parse::<u64>()
            .map(IndexLaw::Deterministic)
            .map_err(|e| format!("bad ensemble size `{value}`: {e}")),
        _ => Err(format!("unknown index law `{kind}`")),
    }
}

/// Turns `key=value` lines into flags. Blank lines and `#` comments are
/// skipped; `key=true` becomes a bare switch and `key=false` is dropped.
pub fn config_flags(text: &str) -> Result<Vec<String>, String> {
    let mut flags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got `{line}`", i + 1))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", i + 1));
        }
        if key == "config" {
            return Err(format!(
                "config line {}: nested config files are not supported",
                i + 1
            ));
        }
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => flags.push(format!("--{key}={value}")),
        }
    }
    Ok(flags)
}

/// Position of the `--config` value in `argv`, if any.
fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            return it.next().cloned();
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(path.to_string());
        }
    }
    None
}

/// Inserts the config file's flags right after the subcommand name, so any
/// flag repeated on the command line comes later and wins.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config file {path}: {e}"))?;
    let flags = config_flags(&text)?;
    let Some(sub) = argv.iter().skip(1).position(|a| !a.starts_with('-')) else {
        return Ok(argv);
    };
    let at = sub + 2;
    let mut merged = argv[..at].to_vec();
    merged.extend(flags);
    merged.extend_from_slice(&argv[at..]);
    Ok(merged)
}
