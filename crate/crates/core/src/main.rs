use std::process::ExitCode;

fn main() -> ExitCode {
    let outcome = tubejet::cli::run(std::env::args().skip(1));
    if let Some(text) = outcome.rendered() {
        match &outcome.out {
            Some(path) => {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            None => print!("{text}"),
        }
    }
    if let Some(msg) = &outcome.message {
        if outcome.report.is_none() && outcome.code == 0 {
            print!("{msg}");
        } else {
            eprintln!("{}", msg.trim_end());
        }
    }
    ExitCode::from(outcome.code as u8)
}
