use std::process::ExitCode;

use ciss_nv::cli::{command, config_from_matches, run_to_destination};

fn main() -> ExitCode {
    let matches = command().get_matches();
    let result = config_from_matches(&matches).and_then(|cfg| run_to_destination(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
