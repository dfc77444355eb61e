//! Key-value config files mirroring the command-line flags.
//!
//! One `key = value` pair per line, `#` starts a comment, keys use the long
//! flag names (`bm25-k1`, `fb-docs`, `alpha-grid`, ...). Flags always
//! override config values.

use std::collections::HashMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    idx + 1
                )));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!("config key `{key}` has invalid value `{raw}`"))
            }),
        }
    }
}

/// Flag beats config beats default.
pub fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    config: &Config,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    Ok(config.get(key)?.unwrap_or(default))
}

/// Same, for options without a default.
pub fn resolve_opt<T: std::str::FromStr>(
    flag: Option<T>,
    config: &Config,
    key: &str,
) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    config.get(key)
}

/// Comma-separated list flags (`--r-grid 10,20,30`).
pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse::<T>()
                .map_err(|_| CliError::usage(format!("invalid {what} value `{part}`")))?,
        );
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("empty {what} list")));
    }
    Ok(out)
}
