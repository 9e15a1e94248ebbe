//! Flat `key=value` config files merged under the command line.

use std::path::Path;

/// Read `key=value` lines; blank lines and `#` comments are skipped.
pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        pairs.push((key, v.trim().to_string()));
    }
    Ok(pairs)
}

/// Value of `--config` in raw arguments, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn present(args: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_value = format!("--{key}=");
    args.iter()
        .any(|a| *a == flag || a.starts_with(&with_value))
}

/// Append config entries whose flag is absent from `args`, so explicit
/// flags win. `true`/`false` values toggle switches.
pub fn merge(mut args: Vec<String>, pairs: &[(String, String)]) -> Vec<String> {
    let originally: Vec<String> = args.clone();
    for (k, v) in pairs {
        if k == "config" || present(&originally, k) {
            continue;
        }
        match v.as_str() {
            "true" => args.push(format!("--{k}")),
            "false" => {}
            _ => {
                args.push(format!("--{k}"));
                args.push(v.clone());
            }
        }
    }
    args
}
