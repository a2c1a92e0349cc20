use std::process::ExitCode;

fn main() -> ExitCode {
    haarboost::cli::main_entry()
}
