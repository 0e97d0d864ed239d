use std::ffi::OsString;
use std::fs;

use anyhow::{bail, Context, Result};

/// Parses a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_flat(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{origin}:{}: expected key=value", i + 1);
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Replaces `--config <path>` (or `--config=<path>`) by the file's entries as
/// flags placed right after the subcommand, so explicit flags win.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            let Some(p) = it.next() else {
                bail!("--config needs a path");
            };
            path = Some(p);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let origin = path.to_string_lossy().into_owned();
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {origin}"))?;
    let mut flags = Vec::new();
    for (k, v) in parse_flat(&text, &origin)? {
        match v.as_str() {
            "true" => flags.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                flags.push(OsString::from(format!("--{k}")));
                flags.push(OsString::from(v));
            }
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, flags);
    Ok(rest)
}
