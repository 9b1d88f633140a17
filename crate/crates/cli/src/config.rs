//! `--config file.json`: a JSON object whose keys mirror the long flags.
//!
//! The flags are spliced into the argument list directly after the
//! subcommand, so anything given explicitly on the command line comes later
//! and wins.

use std::fs;

use anyhow::{bail, Context, Result};
use serde_json::Value;

const COMMANDS: [&str; 5] = ["bench", "calibrate", "predict", "compare", "lsm"];
const LSM_MODES: [&str; 2] = ["costs", "simulate"];

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Index just past the (possibly nested) subcommand name.
fn insertion_point(args: &[String]) -> Option<usize> {
    let cmd = args.iter().position(|a| COMMANDS.contains(&a.as_str()))?;
    if args[cmd] == "lsm" {
        if let Some(mode) = args[cmd + 1..].iter().position(|a| LSM_MODES.contains(&a.as_str())) {
            return Some(cmd + 1 + mode + 1);
        }
    }
    Some(cmd + 1)
}

fn flags_from(doc: &Value) -> Result<Vec<String>> {
    let Value::Object(map) = doc else {
        bail!("config must be a JSON object of flag names to values");
    };
    let mut flags = Vec::new();
    for (key, value) in map {
        let name = format!("--{}", key.replace('_', "-"));
        if name == "--config" {
            continue;
        }
        let text = match value {
            Value::Null => continue,
            Value::Bool(b) => b.to_string(),
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    Value::Number(n) => Ok(n.to_string()),
                    other => bail!("unsupported list item {other} for {name}"),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            Value::Object(_) => bail!("nested objects are not supported ({name})"),
        };
        flags.push(format!("{name}={text}"));
    }
    Ok(flags)
}

/// Returns `args` with the flags of the referenced config file spliced in.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {path}"))?;
    let doc: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))?;
    let flags = flags_from(&doc)?;
    let Some(at) = insertion_point(&args) else {
        return Ok(args);
    };
    let mut out = args;
    out.splice(at..at, flags);
    Ok(out)
}
