use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use prob_sampler::compiler::{OrderingHeuristic, DEFAULT_MAX_VARS};
use prob_sampler::sampler::Mode;

/// Compile CNF formulas into probabilistic decision diagrams and draw
/// weighted samples of their satisfying assignments.
#[derive(Debug, Parser)]
#[command(name = "prob-sampler", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a CNF formula and write the diagram.
    Compile(CompileArgs),
    /// Smooth a diagram file.
    Smooth(SmoothArgs),
    /// Draw k weighted samples.
    Sample(SampleArgs),
    /// Run incremental sampling rounds on one compiled diagram.
    Inc(IncArgs),
    /// Verify the structural properties of a diagram file.
    Check(CheckArgs),
    /// Compare sampled and exact distributions for a small formula.
    Dist(DistArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    Natural,
    Occ,
}

impl From<OrderingArg> for OrderingHeuristic {
    fn from(a: OrderingArg) -> Self {
        match a {
            OrderingArg::Natural => OrderingHeuristic::Natural,
            OrderingArg::Occ => OrderingHeuristic::OccurrenceDesc,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Log,
    Rational,
}

impl From<ModeArg> for Mode {
    fn from(a: ModeArg) -> Self {
        match a {
            ModeArg::Log => Mode::Log,
            ModeArg::Rational => Mode::Rational,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompileOpts {
    #[arg(long, value_enum, default_value = "occ")]
    pub ordering: OrderingArg,
    /// Refuse formulas with more variables than this.
    #[arg(long, default_value_t = DEFAULT_MAX_VARS)]
    pub max_vars: u32,
}

/// Where the diagram comes from: a CNF to compile, or a diagram file.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    #[arg(long)]
    pub cnf: Option<PathBuf>,
    #[arg(long)]
    pub prob: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SamplingOpts {
    /// Literal weights; uniform when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(short = 'k', default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, env = "PROB_SAMPLER_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "log")]
    pub mode: ModeArg,
    /// Worker threads for sampling.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: u64,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[command(flatten)]
    pub compile: CompileOpts,
    /// Smooth before writing.
    #[arg(long)]
    pub smooth: bool,
    /// Diagram output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    #[arg(long)]
    pub prob: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub compile: CompileOpts,
    #[command(flatten)]
    pub sampling: SamplingOpts,
    /// Model lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IncArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub compile: CompileOpts,
    #[command(flatten)]
    pub sampling: SamplingOpts,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub rounds: u64,
    /// Every round reuses the initial weights instead of deriving new ones.
    #[arg(long)]
    pub constant: bool,
    /// Model lines output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-round CSV; stderr when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub prob: PathBuf,
    /// Weights for the annotation check; uniform when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    #[arg(long)]
    pub cnf: PathBuf,
    #[command(flatten)]
    pub compile: CompileOpts,
    #[command(flatten)]
    pub sampling: SamplingOpts,
    /// Occurrence histogram CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["prob-sampler", "sample", "--cnf", "f.cnf"]).unwrap();
        let Command::Sample(a) = cli.command else {
            panic!("expected sample");
        };
        assert_eq!(a.sampling.k, 100);
        assert_eq!(a.sampling.threads, 1);
        assert_eq!(a.sampling.mode, ModeArg::Log);
        assert_eq!(a.compile.ordering, OrderingArg::Occ);
        assert_eq!(a.compile.max_vars, DEFAULT_MAX_VARS);
    }

    #[test]
    fn one_source_only() {
        assert!(Cli::try_parse_from(["prob-sampler", "inc", "--cnf", "a", "--prob", "b"]).is_err());
        assert!(Cli::try_parse_from(["prob-sampler", "inc"]).is_err());
        assert!(Cli::try_parse_from(["prob-sampler", "inc", "--prob", "b", "--rounds", "0"]).is_err());
    }
}
