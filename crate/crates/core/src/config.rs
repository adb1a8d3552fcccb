//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys match the long
//! command-line flag names without dashes; flags given on the command line
//! take precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1)))?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::InvalidConfig(format!("cannot parse {key} = '{v}'"))),
        }
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => {
                parse_list(v).map(Some).map_err(|_| Error::InvalidConfig(format!("cannot parse list {key} = '{v}'")))
            }
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| x.trim().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_types_values() {
        let c = Config::parse("# run\nn = 300\np=0.1\n\nd-list = 1024, 4096\nout = a.csv\n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), Some(300));
        assert_eq!(c.get::<f64>("p").unwrap(), Some(0.1));
        assert_eq!(c.get_list::<usize>("d_list").unwrap(), Some(vec![1024, 4096]));
        assert_eq!(c.raw("out"), Some("a.csv"));
        assert_eq!(c.get::<u64>("seed").unwrap(), None);
        assert!(c.get::<usize>("p").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("n 300").is_err());
        assert!(Config::parse("=3").is_err());
        assert!(Config::parse("n=1\nn=2").is_err());
    }
}
