//! `milrp` command-line frontend.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// Input problems exit with 2, runtime failures with 3.
pub enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

pub trait ResultExt<T> {
    fn input(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Joins the error chain, dropping causes already quoted by their parent.
fn chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.ends_with(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MI_LRP_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Explain(a) => commands::explain_cmd(a),
        Command::Topoplot(a) => commands::topoplot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::from(3)
        }
    }
}
