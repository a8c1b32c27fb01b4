use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(harmonic_switch::cli::main_with_args(std::env::args_os()))
}
