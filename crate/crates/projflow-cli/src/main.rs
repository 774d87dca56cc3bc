use std::process::ExitCode;

fn main() -> ExitCode {
    projflow_cli::run()
}
