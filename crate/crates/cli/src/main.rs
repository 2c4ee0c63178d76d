mod args;
mod commands;

use std::io::IsTerminal;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use surgscope::{Error, Result};

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into());
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text)? {
        Value::Object(m) => {
            const SECTIONS: [&str; 10] = [
                "synth", "track", "skill", "signature", "featurize", "lda", "filter", "eval", "bench", "run",
            ];
            if let Some(k) = m.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
                return Err(Error::Config(format!("unknown config section {k:?}")));
            }
            Ok(m)
        }
        _ => Err(Error::Config("config file must hold a JSON object".into())),
    }
}

/// Overlay command-line flags on a config section. Keys in the section that
/// no flag understands are rejected.
fn merge<T: Serialize + DeserializeOwned>(cli: &T, section: Option<&Value>) -> Result<T> {
    let mut base = match section {
        None => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(Error::Config("config sections must be JSON objects".into())),
    };
    let given: Vec<String> = base.iter().filter(|(_, v)| !v.is_null()).map(|(k, _)| k.clone()).collect();
    if let Value::Object(flags) = serde_json::to_value(cli)? {
        base.extend(flags);
    }
    let merged: T = serde_json::from_value(Value::Object(base))
        .map_err(|e| Error::Config(format!("config: {e}")))?;
    if let Value::Object(known) = serde_json::to_value(&merged)? {
        if let Some(k) = given.iter().find(|k| !known.contains_key(*k)) {
            return Err(Error::Config(format!("config: unknown key {k:?}")));
        }
    }
    Ok(merged)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    let section = config.get(cli.command.section());
    match &cli.command {
        Command::Synth(a) => commands::synth(&merge(a, section)?),
        Command::Track(a) => commands::track(&merge(a, section)?),
        Command::Skill(a) => commands::skill(&merge(a, section)?),
        Command::Signature(a) => commands::signature(&merge(a, section)?),
        Command::Featurize(a) => commands::featurize(&merge(a, section)?),
        Command::Lda(a) => commands::lda(&merge(a, section)?),
        Command::Filter(a) => commands::filter(&merge(a, section)?),
        Command::Eval(a) => commands::eval(&merge(a, section)?),
        Command::Bench(a) => commands::bench(&merge(a, section)?),
        Command::Run(a) => commands::run(&merge(a, section)?),
    }
}
