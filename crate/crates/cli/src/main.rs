use std::process::ExitCode;

fn main() -> ExitCode {
    match jigsaw_cli::run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jigsaw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
