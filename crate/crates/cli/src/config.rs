//! `key = value` config files.
//!
//! Entries are spliced into the argument list as `--key value` right after
//! the subcommand, ahead of the user's own flags. Because every flag
//! overrides earlier occurrences of itself, explicit flags win.

use std::fs;

use clap::Command;

pub struct ConfigError(pub String);

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(ConfigError(format!("line {}: empty key", lineno + 1)));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

/// Finds `--config PATH` or `--config=PATH` in raw arguments.
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

/// Returns `args` with the config file's entries injected, or `args`
/// unchanged when no `--config` is given.
pub fn expand(cmd: &Command, args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError(format!("{path}: {e}")))?;
    let entries = parse(&text).map_err(|ConfigError(m)| ConfigError(format!("{path}: {m}")))?;

    let Some(sub_pos) = args
        .iter()
        .position(|a| cmd.get_subcommands().any(|s| s.get_name() == a))
    else {
        return Ok(args);
    };
    let sub = cmd
        .find_subcommand(&args[sub_pos])
        .expect("position found by name");

    let mut injected = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            return Err(ConfigError(format!("{path}: `config` cannot be nested")));
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| {
                ConfigError(format!(
                    "{path}: unknown key `{key}` for `{}`",
                    sub.get_name()
                ))
            })?;
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value);
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => injected.push(format!("--{key}")),
                "false" | "no" | "0" => {}
                other => {
                    return Err(ConfigError(format!(
                        "{path}: `{key}` is a switch; expected true or false, got `{other}`"
                    )))
                }
            }
        }
    }
    let mut out = args[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[sub_pos + 1..]);
    Ok(out)
}
