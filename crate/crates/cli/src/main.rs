use std::process::ExitCode;

use imagtime_cli::{execute, parse_args, ExitStatus};

fn main() -> ExitCode {
    match parse_args(std::env::args_os()) {
        Ok(spec) => execute(&spec).into(),
        Err(e) => {
            e.print();
            if e.is_informational() {
                ExitStatus::Success.into()
            } else {
                ExitStatus::Usage.into()
            }
        }
    }
}
