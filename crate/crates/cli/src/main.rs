mod cli;
mod commands;
mod render;

use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rayon::prelude::*;
use serde_json::Value;

use cli::{Cli, Command, Output, Settings};
use commands::{Failure, Outcome, Report};

fn read_input(path: &str) -> Result<String, Failure> {
    let mut buf = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut buf).map(|_| ())
    } else {
        std::fs::File::open(path).and_then(|mut f| f.read_to_string(&mut buf).map(|_| ()))
    };
    res.map_err(|e| Failure::new("io", format!("{path}: {e}")))?;
    Ok(buf)
}

fn parse_values(text: &str) -> Result<Vec<Value>, Failure> {
    let values = serde_json::Deserializer::from_str(text)
        .into_iter::<Value>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new("parse", e.to_string()))?;
    if values.is_empty() {
        return Err(Failure::new("parse", "no JSON input"));
    }
    Ok(values)
}

fn run_one(cmd: &Command, s: &Settings, v: &Value) -> Outcome {
    match cmd {
        Command::Classify { .. } => commands::classify_cmd(v),
        Command::Complete { verify, .. } => commands::complete_cmd(s, v, *verify),
        Command::PsdComplete { .. } => commands::psd_complete_cmd(s, v),
        Command::Path { .. } => commands::path_cmd(s, v),
        Command::Sd { .. } => commands::sd_cmd(s, v),
        Command::Bezout { .. } => commands::bezout_cmd(v),
        Command::GsInvert { .. } => commands::gs_invert_cmd(v),
        Command::Demo => commands::demo_cmd(s),
    }
}

fn batchable(cmd: &Command) -> bool {
    matches!(
        cmd,
        Command::Classify { .. } | Command::Complete { .. } | Command::PsdComplete { .. } | Command::Sd { .. }
    )
}

fn run_batch(cli: &Cli, s: &Settings, values: &[Value]) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Failure::new("internal", e.to_string()))?;
    let outcomes: Vec<Outcome> = pool.install(|| values.par_iter().map(|v| run_one(&cli.command, s, v)).collect());
    let mut code = 0;
    let mut lines = Vec::with_capacity(values.len());
    for o in outcomes {
        match o {
            Ok(r) => {
                code = code.max(r.code);
                lines.extend(r.lines);
            }
            Err(f) => {
                code = code.max(f.code);
                lines.push(f.to_json());
            }
        }
    }
    Ok(Report { lines, code })
}

fn run(cli: &Cli) -> Outcome {
    let s = cli.settings().map_err(|m| Failure::new("usage", m))?;
    let Some(path) = cli.input() else {
        return run_one(&cli.command, &s, &Value::Null);
    };
    let values = parse_values(&read_input(path)?)?;
    match values.as_slice() {
        [one] => run_one(&cli.command, &s, one),
        many if batchable(&cli.command) => run_batch(cli, &s, many),
        _ => Err(Failure::new("usage", "this command takes a single JSON object")),
    }
}

fn emit(report: &Report, output: Output) -> io::Result<()> {
    let mut out = io::stdout().lock();
    for line in &report.lines {
        match output {
            Output::Json => writeln!(out, "{line}")?,
            Output::Text => {
                write!(out, "{}", render::text(line))?;
                if report.lines.len() > 1 {
                    writeln!(out)?;
                }
            }
        }
    }
    out.flush()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", Failure::new("usage", first).to_json());
            return ExitCode::from(1);
        }
    };
    let (report, code) = match run(&cli) {
        Ok(r) => {
            let code = r.code;
            (Some(r), code)
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            (None, f.code)
        }
    };
    if let Some(r) = report {
        if let Err(e) = emit(&r, cli.output) {
            if e.kind() != io::ErrorKind::BrokenPipe {
                eprintln!("{}", Failure::new("io", e.to_string()).to_json());
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::from(code as u8)
}
