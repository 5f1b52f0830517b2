use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use hbni_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // --help and --version land here too
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut stdout = BufWriter::new(io::stdout().lock());
    let mut stderr = io::stderr();
    let result = run(cli, &mut stdout, &mut stderr);
    let flushed = stdout.flush();
    match result {
        Ok(()) if flushed.is_ok() => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
