use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(seqgen::cli::main_with(std::env::args_os()))
}
