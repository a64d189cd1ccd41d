use std::process::ExitCode;

use ropelab_cli::{parse_args, run, UsageError};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let code = match parse_args(&argv) {
        Ok(cmd) => run(&cmd),
        Err(e) => {
            match &e {
                UsageError::Info(text) => print!("{text}"),
                UsageError::Invalid(_) => eprintln!("{e}"),
            }
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
