use std::process::ExitCode;

fn main() -> ExitCode {
    cliqueloc::cli::main_with_args(std::env::args_os())
}
