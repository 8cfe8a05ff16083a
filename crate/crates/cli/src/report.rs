use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Bumped whenever a field of any command's report changes meaning.
pub const SCHEMA: &str = "ncprotect-report/1";

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    schema: &'static str,
    tool_version: &'static str,
    command: &'a str,
    config: &'a C,
    result: &'a R,
}

/// Writes the report for `command` to `output`, or stdout.
pub fn emit<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R, output: Option<&Path>) -> Result<()> {
    let envelope = Envelope {
        schema: SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
