//! Flat `key=value` run configuration.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Keys
//! are checked against the set a subcommand accepts before anything runs.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Config(format!("line {line}: expected key=value, got '{content}'")));
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {line}: empty key")));
            }
            let entry = Entry { value: value.trim().to_string(), line };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(CliError::Config(format!(
                    "line {line}: key '{key}' already set on line {}",
                    prev.line
                )));
            }
        }
        Ok(Self { entries })
    }

    /// Rejects any key outside `allowed`.
    pub fn restrict_to(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((key, entry)) => Err(CliError::Config(format!(
                "line {}: unknown key '{key}' (allowed: {})",
                entry.line,
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.entries
            .get(key)
            .map(|e| {
                e.value.parse::<T>().map_err(|_| {
                    CliError::Config(format!("line {}: cannot parse value '{}' for key '{key}'", e.line, e.value))
                })
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        self.get(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list of numbers.
    pub fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    CliError::Config(format!("line {}: '{}' in key '{key}' is not a number", e.line, cell.trim()))
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let cfg = RunConfig::parse("# header\n\np0 = 1e-12  # molar\ns0=1e-10\n").unwrap();
        assert_eq!(cfg.require::<f64>("p0").unwrap(), 1e-12);
        assert_eq!(cfg.get::<f64>("k").unwrap(), None);
        assert_eq!(cfg.get_or("t0", 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(RunConfig::parse("p0 1e-12").is_err());
        assert!(RunConfig::parse("=3").is_err());
        let err = RunConfig::parse("p0=1\np0=2").unwrap_err().to_string();
        assert!(err.contains("p0") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_and_bad_values_name_the_key() {
        let cfg = RunConfig::parse("p0=1e-12\nfoo=3\n").unwrap();
        let err = cfg.restrict_to(&["p0"]).unwrap_err().to_string();
        assert!(err.contains("'foo'"), "{err}");
        let cfg = RunConfig::parse("k=fast\n").unwrap();
        let err = cfg.require::<f64>("k").unwrap_err().to_string();
        assert!(err.contains("'k'"), "{err}");
        let err = cfg.require::<f64>("s0").unwrap_err().to_string();
        assert!(err.contains("'s0'"), "{err}");
    }

    #[test]
    fn parses_lists() {
        let cfg = RunConfig::parse("withdrawal_times = 10, 20.5 ,3e2\nbad=1,x\n").unwrap();
        assert_eq!(cfg.get_list("withdrawal_times").unwrap().unwrap(), vec![10.0, 20.5, 300.0]);
        assert!(cfg.get_list("bad").is_err());
    }
}
