//! Plain-text `key=value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected key=value, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            if entries
                .insert(key.to_string(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::parse(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>>
    where
        V::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| {
                let msg = format!("bad value for `{key}`: {e}");
                if *line == 0 {
                    Error::Config(msg)
                } else {
                    Error::parse(*line, msg)
                }
            }),
        }
    }

    pub fn get_or<V: FromStr>(&self, key: &str, default: V) -> Result<V>
    where
        V::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Rejects keys outside `known`, so typos do not pass silently.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(Error::parse(*line, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# header\n a = 1 \n\nb=x # trailing\n").unwrap();
        assert_eq!(c.get::<i32>("a").unwrap(), Some(1));
        assert_eq!(c.raw("b"), Some("x"));
        assert_eq!(c.get::<i32>("zz").unwrap(), None);
        assert_eq!(c.get_or("zz", 7).unwrap(), 7);
    }

    #[test]
    fn errors_name_the_line() {
        let e = Config::parse("a=1\nnot a pair\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = Config::parse("a=1\na=2\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let c = Config::parse("\n\nn=abc\n").unwrap();
        assert!(matches!(c.get::<usize>("n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(c.check_keys(&["m"]), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn set_overrides() {
        let mut c = Config::parse("seed=1").unwrap();
        c.set("seed", 5);
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(5));
    }
}
