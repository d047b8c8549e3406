use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    susrate_cli::init_logging();
    let code = susrate_cli::run_from(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code)
}
