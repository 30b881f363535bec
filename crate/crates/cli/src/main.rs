//! `eigendesign <command> [--flag value]...`
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on solver failures.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use commands::{common_of, Output, RunError};
use config::{expand_config, out_dir, Cli, Command, UsageError};

const THREADS_VAR: &str = "EIGENDESIGN_THREADS";

fn threads() -> Result<usize, UsageError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(UsageError(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: &Cli, threads: usize) -> Result<Output, RunError> {
    let mut out = match &cli.command {
        Command::Limit(a) => commands::limit(a),
        Command::Identities(a) => commands::identities(a),
        Command::Solve(a) => commands::solve(a),
        Command::Optimize(a) => commands::optimize_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    }?;
    let name = match &cli.command {
        Command::Limit(_) => "limit",
        Command::Identities(_) => "identities",
        Command::Solve(_) => "solve",
        Command::Optimize(_) => "optimize",
        Command::Sweep(_) => "sweep",
    };
    out.meta
        .comment(&format!("eigendesign-cli {} / eigendesign-core {}", env!("CARGO_PKG_VERSION"), eigendesign::VERSION))
        .comment(&format!("command: {name}"))
        .comment(&format!("threads: {threads}"))
        .out(common_of(&cli.command));
    Ok(out)
}

fn write_all(dir: &std::path::Path, out: Output) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    std::fs::write(dir.join("meta.txt"), out.meta.into_string())
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(UsageError(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let n = match threads() {
        Ok(n) => n,
        Err(UsageError(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        eprintln!("error: thread pool: {e}");
        return ExitCode::from(2);
    }
    match run(&cli, n) {
        Ok(out) => {
            print!("{}", out.stdout);
            let dir = out_dir(common_of(&cli.command)).to_path_buf();
            if let Err(e) = write_all(&dir, out) {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Usage(UsageError(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(RunError::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
