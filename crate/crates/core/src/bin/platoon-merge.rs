use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(platoon_merge::cli::main() as u8)
}
