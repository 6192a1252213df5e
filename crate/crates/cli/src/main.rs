use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use fracpq_cli::{run, Cli, CliError, Emitter, RunConfig, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK};

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("FRACPQ_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Invalid(format!("FRACPQ_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("cannot size the thread pool: {e}")))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let cfg = RunConfig::from_command(cli.command)?;
    let to_stdout = cfg.out.is_none() && cfg.emit.is_some();
    let emitter = match (&cfg.out, cfg.emit) {
        (Some(path), emit) => Emitter::new(emit, Box::new(BufWriter::new(File::create(path)?))),
        (None, Some(emit)) => Emitter::new(Some(emit), Box::new(io::stdout())),
        (None, None) => Emitter::silent(),
    };
    let outcome = run(&cfg, emitter)?;
    // Keep stdout clean when it carries the data.
    let mut text: Box<dyn Write> = if to_stdout { Box::new(io::stderr()) } else { Box::new(io::stdout()) };
    for line in &outcome.summary {
        writeln!(text, "{line}")?;
    }
    if outcome.converged {
        Ok(EXIT_OK)
    } else {
        writeln!(io::stderr(), "error: computation did not converge")?;
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INVALID),
            };
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
