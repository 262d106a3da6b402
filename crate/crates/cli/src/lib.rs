//! Command-line front end for `qmz-core`.
//!
//! Every command prints one JSON document on stdout (or CSV for `eval`
//! sweeps). Failures print `{"error": {...}}` instead. Exit codes:
//!
//! | code | meaning                                        |
//! |------|------------------------------------------------|
//! | 0    | success                                        |
//! | 1    | a `check` suite had failing cases              |
//! | 2    | bad argument, domain violation, size limit     |
//! | 3    | summation budget exhausted                     |
//! | 4    | point on or too close to a pole, singular data |

pub mod cache;
pub mod check;
pub mod commands;
pub mod complex_arg;
pub mod error;

use std::ffi::OsString;

use clap::Parser;

use commands::{Body, Cli};
use error::{exit, CliError};

/// Parse `argv`, run the command and return the text for stdout with the
/// exit code. Help and version requests come back with code 0.
pub fn run<I, T>(argv: I) -> (String, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => return (e.to_string(), exit::OK),
        Err(e) => {
            return (
                render(&CliError::Usage(first_line(&e.to_string())).to_json()),
                exit::DOMAIN,
            )
        }
    };
    match commands::dispatch(cli) {
        Ok(out) => match out.body {
            Body::Json(v) => (render(&v), out.code),
            Body::Csv(s) => (s, out.code),
        },
        Err(e) => (render(&e.to_json()), e.exit_code()),
    }
}

/// Clap's message without the usage and help footer, on one line.
fn first_line(s: &str) -> String {
    let head: Vec<&str> = s
        .lines()
        .take_while(|l| !l.trim().is_empty())
        .map(str::trim)
        .collect();
    head.join(" ").trim_start_matches("error: ").to_string()
}

fn render(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialise");
    s.push('\n');
    s
}
