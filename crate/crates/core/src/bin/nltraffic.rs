use std::process::ExitCode;

fn main() -> ExitCode {
    nonlocal_traffic::cli::main_with_args(std::env::args_os())
}
