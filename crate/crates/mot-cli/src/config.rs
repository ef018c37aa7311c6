//! Line-oriented `key = value` configuration files with `[mu]`, `[nu]`,
//! `[payoff]` and `[run]` sections. Every key can also be supplied (and is
//! overridden) by a command-line flag.

use std::collections::BTreeMap;

/// Parsed configuration file content.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    pub mu_spec: Option<String>,
    pub nu_spec: Option<String>,
    pub payoff_spec: Option<String>,
    pub run: BTreeMap<String, String>,
}

pub fn parse(text: &str) -> Result<FileConfig, String> {
    let mut cfg = FileConfig::default();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            if !matches!(section.as_str(), "mu" | "nu" | "payoff" | "run") {
                return Err(format!("line {}: unknown section [{section}]", lineno + 1));
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected 'key = value', got '{line}'", lineno + 1));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        match section.as_str() {
            "mu" | "nu" | "payoff" => {
                if key != "spec" {
                    return Err(format!(
                        "line {}: section [{section}] only accepts 'spec', got '{key}'",
                        lineno + 1
                    ));
                }
                match section.as_str() {
                    "mu" => cfg.mu_spec = Some(value),
                    "nu" => cfg.nu_spec = Some(value),
                    _ => cfg.payoff_spec = Some(value),
                }
            }
            "run" => {
                let known = [
                    "plan", "grid", "atoms", "out", "json", "quad_tol", "method", "scheme",
                    "suite", "hedge",
                ];
                if !known.contains(&key.as_str()) {
                    return Err(format!("line {}: unknown run key '{key}'", lineno + 1));
                }
                cfg.run.insert(key, value);
            }
            _ => return Err(format!("line {}: data before any section", lineno + 1)),
        }
    }
    Ok(cfg)
}

pub fn load(path: &str) -> Result<FileConfig, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read config '{path}': {e}"))?;
    parse(&text)
}
