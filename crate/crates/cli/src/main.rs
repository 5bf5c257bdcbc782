use std::process::ExitCode;

fn main() -> ExitCode {
    singular_hjb_cli::main_with_args(std::env::args_os())
}
