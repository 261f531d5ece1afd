use std::io::{IsTerminal, Write};
use std::process::ExitCode;

use clap::Parser;
use errcalc_cli::{execute, Cli, CliError};

fn run(cli: &Cli) -> Result<(), CliError> {
    let report = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| execute(cli))?,
        None => execute(cli)?,
    };
    let json = report.to_json();
    match &cli.output {
        Some(path) => std::fs::write(path, &json).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(json.as_bytes());
        }
    }
    if std::io::stderr().is_terminal() {
        eprint!("{}", report.table);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("errcalc: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
