//! `multitensor` command-line tool.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::CliError;
use multitensor::optimizer::SearchConfig;
use multitensor::plan::CostConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "multitensor",
    version,
    about = "Batched circuit amplitudes by multi-tensor contraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for a contraction plan and write it out.
    Optimize(OptimizeArgs),
    /// Evaluate amplitudes for every bitstring in a samples file.
    Amplitudes(EvalArgs),
    /// Replay an evaluation on shapes only and report its exact cost.
    Emulate(EvalArgs),
    /// Linear cross-entropy fidelity from sample probabilities.
    Xeb(XebArgs),
}

#[derive(Args, Debug, Clone)]
struct CircuitArgs {
    /// Circuit file.
    #[arg(long, short = 'c')]
    circuit: PathBuf,
    /// Fuse single-qubit gates into neighbouring slots. Plans built with
    /// this flag only fit networks built with it.
    #[arg(long)]
    fuse: bool,
    /// Read and write bitstrings with qubit 0 as the rightmost character.
    #[arg(long)]
    reverse_bits: bool,
}

#[derive(Args, Debug, Clone)]
struct CostArgs {
    /// Weight of element reads/writes in the objective.
    #[arg(long, default_value_t = 16.0)]
    alpha: f64,
    /// Weight of the memory overrun penalty.
    #[arg(long, default_value_t = 8.0)]
    beta: f64,
    /// Memory budget of the objective, bytes (suffixes K, M, G allowed).
    #[arg(long, default_value = "8G", value_parser = parse_bytes)]
    m_max: u64,
    /// Exponent of the intermediate-size norm.
    #[arg(long, default_value_t = 4.0)]
    p: f64,
    #[arg(long, default_value_t = 16)]
    bytes_per_scalar: u64,
}

impl CostArgs {
    fn config(&self, k: u64) -> CostConfig {
        CostConfig {
            alpha: self.alpha,
            beta: self.beta,
            m_max: self.m_max as f64,
            p: self.p,
            k,
            bytes_per_scalar: self.bytes_per_scalar,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Bound,
    Exact,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    /// Requests to optimize for. Without it, `--requests` random requests
    /// are assumed.
    #[arg(long, short = 's')]
    samples: Option<PathBuf>,
    /// Request count when no samples file is given.
    #[arg(long, default_value_t = 1)]
    requests: u64,
    /// How subexpression multiplicities are counted. `exact` needs `--samples`.
    #[arg(long, value_enum, default_value_t = Mode::Bound)]
    multiplicity: Mode,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 2.0)]
    temp_init: f64,
    #[arg(long, default_value_t = 0.01)]
    temp_final: f64,
    /// Proposals between slicing moves.
    #[arg(long, default_value_t = 100_000)]
    slice_interval: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Plan output file; stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

impl OptimizeArgs {
    fn search(&self) -> SearchConfig {
        SearchConfig {
            steps: self.steps,
            temp_init: self.temp_init,
            temp_final: self.temp_final,
            slice_interval: self.slice_interval,
            seed: self.seed,
            chains: self.chains,
        }
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    circuit: CircuitArgs,
    /// One bitstring per line; `*` leaves a qubit open.
    #[arg(long, short = 's')]
    samples: PathBuf,
    /// Plan file; the left-deep chain when absent.
    #[arg(long, short = 'p')]
    plan: Option<PathBuf>,
    /// Threads for sliced evaluation.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Resident intermediate limit, bytes (suffixes K, M, G allowed).
    #[arg(long, default_value = "8G", value_parser = parse_bytes)]
    memory_cap: u64,
    #[command(flatten)]
    cost: CostArgs,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "summarize"])))]
struct XebArgs {
    /// Amplitude TSV or one probability per line.
    #[arg(long, short = 'i')]
    input: Option<PathBuf>,
    /// Qubit count of the sampled circuit.
    #[arg(long, short = 'n', requires = "input")]
    qubits: Option<usize>,
    /// Per-instance fidelities (`f` or `id<TAB>f` per line) to average.
    #[arg(long, conflicts_with = "input", requires = "samples")]
    summarize: Option<PathBuf>,
    /// Samples per instance, for the error bars of `--summarize`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, shift) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 30),
        Some('T' | 't') => (&s[..s.len() - 1], 40),
        _ => (s, 0),
    };
    let v: u64 = digits
        .parse()
        .map_err(|_| format!("bad byte count '{s}'"))?;
    v.checked_mul(1u64 << shift)
        .ok_or_else(|| format!("byte count '{s}' overflows"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Optimize(a) => commands::optimize(a),
        Command::Amplitudes(a) => commands::amplitudes(a),
        Command::Emulate(a) => commands::emulate(a),
        Command::Xeb(a) => commands::xeb(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
                CliError::Memory(_) => 3,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_suffixes() {
        assert_eq!(parse_bytes("8G"), Ok(8 << 30));
        assert_eq!(parse_bytes("512k"), Ok(512 << 10));
        assert_eq!(parse_bytes("100"), Ok(100));
        assert!(parse_bytes("x").is_err());
        assert!(parse_bytes("99999999999T").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
