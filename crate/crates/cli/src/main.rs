mod args;
mod commands;
mod manifest;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use args::{Cli, Command};

#[derive(Serialize)]
struct Diagnostics<'a> {
    command: &'a str,
    exit_code: i32,
    error: String,
    chain: Vec<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::FitStage1(_) => "fit-stage1",
            Command::Cluster(_) => "cluster",
            Command::Postprocess(_) => "postprocess",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
            Command::Pipeline(_) => "pipeline",
        }
    }

    fn out_dir(&self) -> Option<&Path> {
        match self {
            Command::Simulate(a) => Some(&a.out_dir),
            Command::FitStage1(a) => Some(&a.out_dir),
            Command::Cluster(a) => Some(&a.out_dir),
            Command::Postprocess(a) => Some(&a.out_dir),
            Command::Pipeline(a) => Some(&a.out_dir),
            Command::Evaluate(_) | Command::Report(_) => None,
        }
    }

    fn run(&self) -> stratify::Result<()> {
        match self {
            Command::Simulate(a) => commands::simulate(a),
            Command::FitStage1(a) => commands::fit_stage1(a),
            Command::Cluster(a) => commands::cluster(a),
            Command::Postprocess(a) => commands::postprocess(a),
            Command::Evaluate(a) => commands::evaluate(a),
            Command::Report(a) => commands::report(a),
            Command::Pipeline(a) => commands::pipeline(a),
        }
    }
}

/// Records a numerical failure next to the run's other artifacts.
fn write_diagnostics(cmd: &Command, err: &stratify::Error, code: i32) {
    let Some(dir) = cmd.out_dir() else { return };
    let mut chain = Vec::new();
    let mut source = std::error::Error::source(err);
    while let Some(s) = source {
        chain.push(s.to_string());
        source = s.source();
    }
    let diag = Diagnostics {
        command: cmd.name(),
        exit_code: code,
        error: err.to_string(),
        chain,
    };
    let path = dir.join(commands::DIAGNOSTICS_FILE);
    let written = std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, serde_json::to_string_pretty(&diag).unwrap_or_default() + "\n"));
    match written {
        Ok(()) => eprintln!("diagnostics written to {}", path.display()),
        Err(e) => eprintln!("could not write {}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    // Usage errors are configuration errors; help and version exit cleanly.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command.run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = err.exit_code();
            eprintln!("error: {err}");
            if code == 3 {
                write_diagnostics(&cli.command, &err, code);
            }
            ExitCode::from(code as u8)
        }
    }
}
