mod args;
mod commands;

use std::ffi::OsString;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Failure;

/// Pulls `--config FILE` / `--config=FILE` out of the raw arguments.
fn take_config(argv: &mut Vec<OsString>) -> Result<Option<OsString>, Failure> {
    let mut i = 1;
    while i < argv.len() {
        let arg = argv[i].to_string_lossy().into_owned();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= argv.len() {
                return Err(Failure::Usage("--config needs a file".into()));
            }
            let value = argv.remove(i + 1);
            argv.remove(i);
            return Ok(Some(value));
        }
        if let Some(value) = arg.strip_prefix("--config=") {
            let value = OsString::from(value);
            argv.remove(i);
            return Ok(Some(value));
        }
        i += 1;
    }
    Ok(None)
}

fn toml_to_flag(key: &str, value: &toml::Value) -> Result<Vec<OsString>, Failure> {
    let flag = format!("--{key}");
    let scalar = |v: &toml::Value| -> Result<String, Failure> {
        match v {
            toml::Value::String(s) => Ok(s.clone()),
            toml::Value::Integer(n) => Ok(n.to_string()),
            toml::Value::Float(f) => Ok(f.to_string()),
            other => Err(Failure::Usage(format!(
                "config key `{key}` has unsupported value {other}"
            ))),
        }
    };
    match value {
        toml::Value::Boolean(true) => Ok(vec![flag.into()]),
        toml::Value::Boolean(false) => Ok(vec![]),
        toml::Value::Array(items) => {
            let joined = items
                .iter()
                .map(scalar)
                .collect::<Result<Vec<_>, _>>()?
                .join(",");
            Ok(vec![flag.into(), joined.into()])
        }
        v => Ok(vec![flag.into(), scalar(v)?.into()]),
    }
}

/// Inserts the `[<subcommand>]` table of the config right after the
/// subcommand name, so flags typed on the command line override it.
fn apply_config(argv: &mut Vec<OsString>, path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Data(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| Failure::Data(format!("malformed config {}: {e}", path.display())))?;
    let Some(pos) = argv
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 1)
    else {
        return Ok(());
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    let Some(section) = table.get(&sub) else {
        return Ok(());
    };
    let toml::Value::Table(section) = section else {
        return Err(Failure::Usage(format!(
            "config entry `{sub}` must be a table"
        )));
    };
    let mut extra = Vec::new();
    for (key, value) in section {
        extra.extend(toml_to_flag(key, value)?);
    }
    argv.splice(pos + 1..pos + 1, extra);
    Ok(())
}

fn run() -> Result<(), Failure> {
    let mut argv: Vec<OsString> = std::env::args_os().collect();
    if let Some(config) = take_config(&mut argv)? {
        apply_config(&mut argv, Path::new(&config))?;
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let _ = e.print();
            return Err(Failure::Usage(String::new()));
        }
    };
    match &cli.command {
        Command::Rotate(a) => commands::rotate(a),
        Command::Augment(a) => commands::augment(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::SgaValidate(a) => commands::sga_validate(a),
        Command::Aggregate(a) => commands::aggregate_cmd(a),
        Command::Weights(a) => commands::weights(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message().is_empty() {
                eprintln!("error: {}", f.message());
            }
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
