//! Flat `key = value` configuration files.
//!
//! Keys are long flag names without the leading dashes. Values from the file
//! are spliced into the argument list ahead of the command-line flags, so
//! flags given on the command line win.

use std::fs;
use std::path::Path;

use crate::CliError;

pub const COMMANDS: [&str; 6] = ["simulate", "fit", "forecast", "backtest", "compare", "mc-study"];

/// Global options that take a value.
const GLOBAL_VALUED: [&str; 3] = ["--config", "--seed", "--threads"];
const GLOBAL_KEYS: [&str; 2] = ["seed", "threads"];

pub fn parse_file(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config {} line {}: expected key = value", path.display(), i + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(CliError::Usage(format!("config {} line {}: empty key", path.display(), i + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn to_flags(entries: &[(String, String)]) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in entries {
        match v.to_ascii_lowercase().as_str() {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.clone());
            }
        }
    }
    out
}

/// Returns `args` with the settings of any `--config FILE` spliced in.
pub fn expand_args(args: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut config = None;
    let mut command_at = None;
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else if GLOBAL_VALUED.contains(&a.as_str()) {
            if a == "--config" {
                config = args.get(i + 1).cloned();
            }
            i += 1;
        } else if COMMANDS.contains(&a.as_str()) {
            command_at = Some(i);
            break;
        }
        i += 1;
    }
    let (Some(path), Some(at)) = (config, command_at) else {
        return Ok(args);
    };
    let entries = parse_file(Path::new(&path))?;
    let (global, local): (Vec<_>, Vec<_>) = entries.into_iter().partition(|(k, _)| GLOBAL_KEYS.contains(&k.as_str()));
    let mut out: Vec<String> = args[..1].to_vec();
    out.extend(to_flags(&global));
    out.extend(args[1..=at].iter().cloned());
    out.extend(to_flags(&local));
    out.extend(args[at + 1..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn config_values_precede_flags() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# study settings\nseed = 9\nbeta = 0.95\nnegate = true\nverbose_x = false").unwrap();
        let args: Vec<String> = ["dyncovar", "--config", f.path().to_str().unwrap(), "fit", "--beta", "0.9"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand_args(args).unwrap();
        let tail: Vec<&str> = out.iter().skip(1).map(String::as_str).collect();
        assert_eq!(tail[..2], ["--seed", "9"]);
        let fit = tail.iter().position(|a| *a == "fit").unwrap();
        assert_eq!(tail[fit + 1..], ["--beta", "0.95", "--negate", "--beta", "0.9"]);
    }

    #[test]
    fn malformed_line_is_reported() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "beta 0.9").unwrap();
        let e = parse_file(f.path()).unwrap_err();
        assert!(e.to_string().contains("line 1"));
    }
}
