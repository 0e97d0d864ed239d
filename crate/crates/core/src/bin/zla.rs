use std::process::ExitCode;

fn main() -> ExitCode {
    zla_core::cli::main_with_args(std::env::args_os())
}
