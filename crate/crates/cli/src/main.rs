//! `phasebound` — batch front-end for phase-precision bounds.
//!
//! ```text
//! phasebound <bound|validate|sweep|compare> --config <path>
//!            [--out <path>] [--tol <real>] [--epsilon <real>]
//! ```
//!
//! The config file selects a probe-state family (or two, for `compare`),
//! an optional sweep axis, and tolerances; results are written as CSV to
//! `--out` or standard output. Exit codes: 0 success, 1 tolerance failure,
//! 2 config error, 3 resource error.

use std::fs;
use std::process::ExitCode;

mod config;
mod run;

use config::Overrides;
use run::Command;

const USAGE: &str = "usage: phasebound <bound|validate|sweep|compare> --config <path> \
[--out <path>] [--tol <real>] [--epsilon <real>]";

fn parse_args(args: &[String]) -> Result<(Command, String, Overrides), String> {
    let Some(command_name) = args.first() else {
        return Err(USAGE.to_string());
    };
    let command = match command_name.as_str() {
        "bound" => Command::Bound,
        "validate" => Command::Validate,
        "sweep" => Command::Sweep,
        "compare" => Command::Compare,
        other => return Err(format!("unknown command '{other}'\n{USAGE}")),
    };
    let mut config_path = None;
    let mut overrides = Overrides::default();
    let mut iter = args[1..].iter();
    while let Some(flag) = iter.next() {
        let mut value = |name: &str| -> Result<String, String> {
            iter.next()
                .cloned()
                .ok_or_else(|| format!("flag {name} needs a value\n{USAGE}"))
        };
        match flag.as_str() {
            "--config" => config_path = Some(value("--config")?),
            "--out" => overrides.out = Some(value("--out")?),
            "--tol" => {
                let raw = value("--tol")?;
                overrides.tol = Some(
                    raw.parse::<f64>()
                        .map_err(|_| format!("--tol: '{raw}' is not a number"))?,
                );
            }
            "--epsilon" => {
                let raw = value("--epsilon")?;
                overrides.epsilon = Some(
                    raw.parse::<f64>()
                        .map_err(|_| format!("--epsilon: '{raw}' is not a number"))?,
                );
            }
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    let Some(config_path) = config_path else {
        return Err(format!("--config is required\n{USAGE}"));
    };
    Ok((command, config_path, overrides))
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (command, config_path, overrides) = match parse_args(&args) {
        Ok(parsed) => parsed,
        Err(message) => {
            eprintln!("config error: {message}");
            return ExitCode::from(2);
        }
    };
    let text = match fs::read_to_string(&config_path) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("config error: cannot read '{config_path}': {e}");
            return ExitCode::from(2);
        }
    };
    let config = match config::load(&text, &overrides) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let (csv, code) = match run::execute(command, &config) {
        Ok(result) => result,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match &config.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &csv) {
                eprintln!("config error: cannot write '{path}': {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{csv}"),
    }
    ExitCode::from(code as u8)
}
