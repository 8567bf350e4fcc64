use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use weingarten::cli::{parse_config, parse_grid, run, ExitStatus, Mode};

/// Prescribed Weingarten curvature solver for spacelike radial graphs.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Sectioned key=value run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `[run] mode`.
    #[arg(long, value_parser = str::parse::<Mode>)]
    mode: Option<Mode>,
    /// Overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[problem] grid`, as NxM.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(ExitStatus::BadConfig.code());
        }
    };
    let mut cfg = match parse_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(ExitStatus::BadConfig.code());
        }
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(o) = args.out {
        cfg.out = o;
    }
    if let Some((a, b)) = args.grid {
        if let Err(e) = cfg.set_grid(a, b) {
            eprintln!("error: --grid: {e}");
            return ExitCode::from(ExitStatus::BadConfig.code());
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let outcome = run(&cfg);
    let code = outcome.status.code();
    if outcome.status == ExitStatus::Ok {
        println!("{} -> {}", outcome.message, cfg.out.display());
    } else {
        eprintln!("exit {code}: {}", outcome.message);
    }
    ExitCode::from(code)
}
