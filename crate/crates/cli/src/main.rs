use std::process::ExitCode;

use sfbreak_cli::CliError;

fn main() -> ExitCode {
    if let Some(threads) = std::env::var("SFBREAK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("sfbreak: could not size the thread pool: {e}");
        }
    }
    match sfbreak_cli::run(std::env::args_os()) {
        Ok(()) | Err(CliError::Help) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sfbreak: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
