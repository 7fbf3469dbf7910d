mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::Output;

const SEED_ENV: &str = "QDS_SEED";

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Ingest(_) => "ingest",
        Command::Index(_) => "index",
        Command::Sketch(_) => "sketch",
        Command::Shadow(_) => "shadow",
        Command::Search(_) => "search",
        Command::Join(_) => "join",
        Command::Eqtest(_) => "eqtest",
        Command::Select(_) => "select",
        Command::Sort(_) => "sort",
        Command::Bench(_) => "bench",
        Command::Calibrate(_) => "calibrate",
    }
}

/// `QDS_SEED` wins over `--seed`.
fn resolve_seed(flag: Option<u64>) -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            let s = v
                .trim()
                .parse()
                .map_err(|_| qsketch::Error::Argument(format!("{SEED_ENV}='{v}' is not a u64")))?;
            if flag.is_some_and(|f| f != s) {
                log::info!("{SEED_ENV}={s} overrides --seed");
            }
            Ok(Some(s))
        }
        Err(_) => Ok(flag),
    }
}

fn run(cli: &Cli) -> anyhow::Result<Output> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(qsketch::Error::Argument("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let seed_opt = resolve_seed(cli.seed)?;
    let seed = seed_opt.unwrap_or(0);
    let v = match &cli.command {
        Command::Gen(a) => commands::gen(a, seed)?,
        Command::Ingest(a) => commands::ingest(a, seed_opt)?,
        Command::Index(a) => commands::index(a, seed)?,
        Command::Sketch(a) => commands::sketch(a, seed)?,
        Command::Shadow(c) => commands::shadow(c, seed)?,
        Command::Search(a) => commands::search(a, seed)?,
        Command::Join(a) => commands::join(a)?,
        Command::Eqtest(a) => commands::eqtest(a, seed)?,
        Command::Select(a) => commands::select(a, seed)?,
        Command::Sort(a) => commands::sort(a, seed)?,
        Command::Calibrate(a) => commands::calibrate(a, seed)?,
        Command::Bench(c) => return commands::bench(c, seed),
    };
    Ok(Output::Json(v))
}

fn error_kind(e: &qsketch::Error) -> &'static str {
    use qsketch::Error::*;
    match e {
        Argument(_) => "argument",
        Precondition(_) => "precondition",
        Resource(_) => "resource",
        Format(_) | Json(_) => "format",
        Internal(_) => "internal",
        Io(_) => "io",
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes()).and_then(|_| out.flush());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let name = command_name(&cli.command);
    match run(&cli) {
        Ok(Output::Raw(s)) => {
            emit(&s);
            ExitCode::SUCCESS
        }
        Ok(Output::Json(result)) => {
            emit(&format!("{}\n", json!({ "command": name, "ok": true, "result": result })));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, code) = match e.chain().find_map(|c| c.downcast_ref::<qsketch::Error>()) {
                Some(q) => (error_kind(q), q.exit_code()),
                None => ("internal", 1),
            };
            eprintln!("error: {e:#}");
            let message = format!("{e:#}");
            emit(&format!(
                "{}\n",
                json!({ "command": name, "ok": false, "error": { "kind": kind, "message": message, "exit_code": code } })
            ));
            ExitCode::from(code as u8)
        }
    }
}
