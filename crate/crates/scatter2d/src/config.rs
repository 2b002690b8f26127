//! Flat key-value experiment configuration.
//!
//! One `key = value` pair per line, grouped under `[section]` headers;
//! `#` starts a comment. The format is deliberately minimal so a config file
//! fully pins an experiment and diffs cleanly.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        sections.entry(current.clone()).or_default();
        for (ln, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("expected 'key = value' on line {}", ln + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse(format!("empty key on line {}", ln + 1)));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|v| v.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key).ok_or_else(|| {
            Error::invalid(format!("missing config key '{key}' in section [{section}]"))
        })
    }

    fn parsed<V: std::str::FromStr>(&self, section: &str, key: &str, raw: &str) -> Result<V> {
        raw.parse().map_err(|_| {
            Error::invalid(format!(
                "config key '{key}' in [{section}] has invalid value '{raw}'"
            ))
        })
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            Some(raw) => self.parsed(section, key, raw),
            None => Ok(default),
        }
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64> {
        let raw = self.require(section, key)?;
        self.parsed(section, key, raw)
    }

    pub fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            Some(raw) => self.parsed(section, key, raw),
            None => Ok(default),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            Some(raw) => self.parsed(section, key, raw),
            None => Ok(default),
        }
    }

    pub fn get_str<'a>(&'a self, section: &str, key: &str, default: &'a str) -> &'a str {
        self.get(section, key).unwrap_or(default)
    }

    /// Comma-separated list of floats (used by sweep grids).
    pub fn get_f64_list(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|x| {
                    x.trim().parse::<f64>().map_err(|_| {
                        Error::invalid(format!(
                            "config key '{key}' in [{section}]: bad list entry '{x}'"
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    /// Comma-separated list of integers.
    pub fn get_usize_list(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|x| {
                    x.trim().parse::<usize>().map_err(|_| {
                        Error::invalid(format!(
                            "config key '{key}' in [{section}]: bad list entry '{x}'"
                        ))
                    })
                })
                .collect::<Result<Vec<usize>>>()
                .map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = Config::parse(
            "k = 5.0\n\
             # global comment\n\
             [mesh]\n\
             elements_per_wavelength = 20  # resolution\n\
             seed = 3\n\
             [noise]\n\
             epsilon = 0.02\n\
             levels = 0.01, 0.02, 0.05\n",
        )
        .unwrap();
        assert_eq!(cfg.require_f64("", "k").unwrap(), 5.0);
        assert_eq!(cfg.get_usize("mesh", "elements_per_wavelength", 0).unwrap(), 20);
        assert_eq!(cfg.get_u64("mesh", "seed", 0).unwrap(), 3);
        assert_eq!(cfg.get_f64("noise", "epsilon", 0.0).unwrap(), 0.02);
        assert_eq!(
            cfg.get_f64_list("noise", "levels").unwrap().unwrap(),
            vec![0.01, 0.02, 0.05]
        );
        assert_eq!(cfg.get_f64("noise", "missing", 1.5).unwrap(), 1.5);
        assert!(cfg.require("noise", "missing").is_err());
        assert!(Config::parse("just a line\n").is_err());
        assert!(Config::parse("[sec]\nkey = not_a_number\n")
            .unwrap()
            .require_f64("sec", "key")
            .is_err());
    }
}
