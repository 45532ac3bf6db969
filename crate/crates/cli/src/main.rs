use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lightloop_core::harness::{run, Command, Expect, Format, RunConfig, DEFAULT_MAX_SIZE, DEFAULT_SAMPLES};
use lightloop_core::intervention::Experiment;
use lightloop_core::minkowski::Policy;

#[derive(Parser)]
#[command(name = "lightloop", version, about = "Causal loops, interventions and space-time embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Largest source/target/conditioning set for affects relations.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_SIZE)]
    max_size: usize,

    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Conservative)]
    policy: PolicyArg,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,

    /// Exit 0 only for this verdict (certify: cyclic|dag, embed-check:
    /// compatible|incompatible).
    #[arg(long, global = true, value_enum)]
    expect: Option<ExpectArg>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Observed distribution, splitting nodes on cycles.
    Solve { model: PathBuf },
    /// d-separation query written `X|Y|Z` with comma-separated sets.
    Dsep { model: PathBuf, query: String },
    /// Every affects relation up to --max-size.
    Affects { model: PathBuf },
    /// Certify a causal loop from the affects relations alone.
    Certify { model: PathBuf },
    /// Check the model's embedding against its affects relations.
    EmbedCheck { model: PathBuf },
    /// Sample the intervention protocol.
    Simulate {
        model: PathBuf,
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: u64,
        #[arg(long)]
        seed: u64,
    },
    /// d-connected but independent triples, and d-separation failures.
    Finetuning { model: PathBuf },
    /// Exact post-intervention distributions of several models.
    Compare {
        #[arg(required = true, num_args = 2..)]
        models: Vec<PathBuf>,
        #[arg(long, value_enum)]
        experiment: ExperimentArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Conservative,
    Reduced,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Machine,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExpectArg {
    Cyclic,
    Dag,
    Compatible,
    Incompatible,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    #[value(name = "E1", alias = "e1")]
    E1,
    #[value(name = "E2", alias = "e2")]
    E2,
}

impl From<ExperimentArg> for Experiment {
    fn from(e: ExperimentArg) -> Self {
        match e {
            ExperimentArg::E1 => Experiment::E1,
            ExperimentArg::E2 => Experiment::E2,
        }
    }
}

fn split_set(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|n| !n.is_empty()).map(str::to_string).collect()
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    let mut seed = None;
    let mut samples = DEFAULT_SAMPLES;
    let (command, models) = match cli.command {
        Cmd::Solve { model } => (Command::Solve, vec![model]),
        Cmd::Dsep { model, query } => {
            let parts: Vec<&str> = query.split('|').collect();
            let [x, y, z] = parts[..] else {
                return Err(format!("dsep query `{query}` must have the form X|Y|Z"));
            };
            (Command::Dsep { x: split_set(x), y: split_set(y), z: split_set(z) }, vec![model])
        }
        Cmd::Affects { model } => (Command::Affects, vec![model]),
        Cmd::Certify { model } => (Command::Certify, vec![model]),
        Cmd::EmbedCheck { model } => (Command::EmbedCheck, vec![model]),
        Cmd::Simulate { model, experiment, samples: n, seed: s } => {
            seed = Some(s);
            samples = n;
            (Command::Simulate { experiment: experiment.into() }, vec![model])
        }
        Cmd::Finetuning { model } => (Command::Finetuning, vec![model]),
        Cmd::Compare { models, experiment } => (Command::Compare { experiment: experiment.into() }, models),
    };
    let mut config = RunConfig::new(command, models);
    config.max_size = cli.max_size;
    config.samples = samples;
    config.seed = seed;
    config.policy = match cli.policy {
        PolicyArg::Conservative => Policy::Conservative,
        PolicyArg::Reduced => Policy::Reduced,
    };
    config.format = match cli.format {
        FormatArg::Text => Format::Text,
        FormatArg::Machine => Format::Machine,
    };
    config.expect = cli.expect.map(|e| match e {
        ExpectArg::Cyclic => Expect::Cyclic,
        ExpectArg::Dag => Expect::Dag,
        ExpectArg::Compatible => Expect::Compatible,
        ExpectArg::Incompatible => Expect::Incompatible,
    });
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let config = match config(cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let outcome = run(&config);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.status as u8)
}
