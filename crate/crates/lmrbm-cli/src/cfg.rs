//! Flat `key = value` config files. One key per line, `#` starts a comment,
//! blank lines ignored. Every CLI flag has a config twin (the flag name
//! without the leading dashes); values given on the command line win.

use std::collections::BTreeMap;
use std::path::Path;

use lmrbm::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected key = value", lineno + 1));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(format!("line {}: empty key", lineno + 1));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// CLI value wins; otherwise the config twin is parsed; otherwise the
    /// default.
    pub fn resolve<T: std::str::FromStr>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T> {
        match cli {
            Some(v) => Ok(v),
            None => match self.get(key) {
                Some(raw) => raw
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("config {key}: bad value {raw:?}"))),
                None => Ok(default),
            },
        }
    }

    /// Like `resolve` but with no default; `None` when absent everywhere.
    pub fn resolve_opt<T: std::str::FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>> {
        match cli {
            Some(v) => Ok(Some(v)),
            None => match self.get(key) {
                Some(raw) => raw
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::InvalidConfig(format!("config {key}: bad value {raw:?}"))),
                None => Ok(None),
            },
        }
    }
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::InvalidConfig(format!("{what}: bad entry {s:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_blanks() {
        let cfg = ConfigFile::parse("a = 1\n# note\n\n  rate=0.3 # trailing\n").unwrap();
        assert_eq!(cfg.get("a"), Some("1"));
        assert_eq!(cfg.get("rate"), Some("0.3"));
        assert_eq!(cfg.get("missing"), None);
    }

    #[test]
    fn cli_wins_over_config() {
        let cfg = ConfigFile::parse("epochs = 7").unwrap();
        assert_eq!(cfg.resolve(Some(3usize), "epochs", 100).unwrap(), 3);
        assert_eq!(cfg.resolve(None::<usize>, "epochs", 100).unwrap(), 7);
        assert_eq!(cfg.resolve(None::<usize>, "batch", 128).unwrap(), 128);
    }

    #[test]
    fn rejects_malformed_lines_and_values() {
        assert!(ConfigFile::parse("just a line").is_err());
        let cfg = ConfigFile::parse("epochs = abc").unwrap();
        assert!(cfg.resolve(None::<usize>, "epochs", 1).is_err());
    }

    #[test]
    fn lists() {
        let v: Vec<f64> = parse_list("0.3, 0.5,0.9", "rates").unwrap();
        assert_eq!(v, vec![0.3, 0.5, 0.9]);
        assert!(parse_list::<f64>("0.3,x", "rates").is_err());
    }
}
