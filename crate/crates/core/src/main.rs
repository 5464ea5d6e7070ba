use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cdlab::request::{parse_document, run, CliError, RunOptions};

/// Batch analysis of weighted shifts, block operators and diagonal kernels.
#[derive(Parser, Debug)]
#[command(name = "cdlab", version)]
struct Args {
    /// Request JSON file; reads standard input when omitted or "-".
    input: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the CSV profile here (commands without a profile write nothing).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads for grid and instance fan-out.
    #[arg(long)]
    threads: Option<usize>,
    /// Suppress the report on standard output and the error message on standard error.
    #[arg(long)]
    quiet: bool,
}

fn read_input(path: &Option<PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = read_input(&args.input)?;
    let (req, paths) = parse_document(&text)?;
    let mut opts = RunOptions::from_env()?;
    opts.threads = args.threads;
    let out = run(&req, &opts)?;
    let json = out.json();
    match args.out.as_ref().or(paths.report.as_ref()) {
        Some(p) => std::fs::write(p, &json).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None if !args.quiet => print!("{json}"),
        None => {}
    }
    if let (Some(p), Some(csv)) = (args.csv.as_ref().or(paths.csv.as_ref()), &out.csv) {
        std::fs::write(p, csv).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !args.quiet {
                eprintln!("cdlab: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
