//! `esar` command-line pipeline: parse, validate, score, aggregate, extract,
//! train, explain, feedback and recognize, each writing a run directory with
//! a manifest of input digests.

pub mod args;
pub mod commands;
pub mod config;
pub mod http;
pub mod manifest;
pub mod split;
pub mod synth;

use std::sync::Arc;

use esar_core::llm::Transport;

pub use args::{Cli, Command};
pub use config::{ConfigError, RunConfig};
pub use split::{check_split, SplitEntry, SplitViolation};

type CredentialLookup = Arc<dyn Fn(&str) -> Option<String> + Send + Sync>;

/// Process-level dependencies, injectable for tests.
#[derive(Clone)]
pub struct Context {
    pub transport: Arc<dyn Transport>,
    /// Overrides the environment lookup of the endpoint credential.
    pub credential: Option<CredentialLookup>,
}

impl Default for Context {
    fn default() -> Self {
        Self {
            transport: Arc::new(http::UreqTransport),
            credential: None,
        }
    }
}

/// Run one subcommand; returns the process exit code.
pub fn run(cli: Cli, ctx: &Context) -> anyhow::Result<i32> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Parse(a) => commands::parse(a, &cfg),
        Command::Validate(a) => commands::validate_cmd(a, &cfg),
        Command::Score(a) => commands::score(a, &cfg),
        Command::Aggregate(a) => commands::aggregate(a, &cfg),
        Command::Extract(a) => commands::extract(a, &cfg),
        Command::Train(a) => commands::train(a, &cfg),
        Command::Explain(a) => commands::explain(a, &cfg),
        Command::Feedback(a) => commands::feedback(a, &cfg, ctx),
        Command::Recognize(a) => commands::recognize(a, &cfg, ctx),
        Command::Synth(a) => commands::synth_cmd(a, &cfg),
        Command::CheckSplit(a) => commands::check_split_cmd(a, &cfg),
        Command::Fixture(a) => commands::fixture(a, &cfg, ctx),
    }
}

/// Parse `argv` and run.
pub fn run_args<I, T>(argv: I, ctx: &Context) -> anyhow::Result<i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(argv)?;
    run(cli, ctx)
}
