//! Flat `key = value` config files. Each key names a long flag of the
//! subcommand; values given on the command line take precedence.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Command;

/// Parses `key = value` (or `key: value`) lines. Blank lines, `#` comments and
/// `[section]` headers are skipped; quotes and list brackets are stripped so
/// simple TOML files work as well.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']') && !line.contains('=')) {
            continue;
        }
        let Some((key, value)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            bail!("config line {}: expected key = value", idx + 1);
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim().trim_start_matches('[').trim_end_matches(']');
        let value = value
            .split(',')
            .map(|v| v.trim().trim_matches('"').trim_matches('\''))
            .collect::<Vec<_>>()
            .join(",");
        if key.is_empty() {
            bail!("config line {}: empty key", idx + 1);
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Finds the value of `--config` in the arguments following the subcommand.
fn config_path(args: &[String]) -> Option<String> {
    let mut iter = args.iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            return iter.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

/// Inserts config-file settings right after the subcommand name, so that any
/// flag given explicitly later on the command line overrides them.
pub fn expand_args(cmd: &Command, argv: Vec<String>) -> Result<Vec<String>> {
    let Some(pos) = argv.iter().skip(1).position(|a| cmd.find_subcommand(a).is_some()).map(|p| p + 1) else {
        return Ok(argv);
    };
    let sub = cmd.find_subcommand(&argv[pos]).expect("checked above");
    let Some(path) = config_path(&argv[pos + 1..]) else {
        return Ok(argv);
    };
    let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config {path}"))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config(&text).with_context(|| format!("parsing config {path}"))? {
        if key == "config" {
            continue;
        }
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!("config {path}: unknown key '{key}' for '{}'", sub.get_name());
        };
        if arg.get_action().takes_values() {
            injected.push(format!("--{key}"));
            injected.push(value);
        } else {
            match value.as_str() {
                "true" | "1" | "yes" | "" => injected.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                other => bail!("config {path}: '{key}' expects true or false, got '{other}'"),
            }
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[pos + 1..]);
    Ok(out)
}
