//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Unknown keys are rejected when an experiment reads its
//! configuration, so typos fail loudly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got {text:?}")]
    Syntax { path: String, line: usize, text: String },
    #[error("duplicate key {0:?}")]
    Duplicate(String),
    #[error("key {key:?}: cannot parse {value:?}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("unknown configuration keys for {experiment}: {keys:?}")]
    Unknown { experiment: String, keys: Vec<String> },
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: origin.to_string(),
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    path: origin.to_string(),
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate(key));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| ConfigError::Value {
                    key: key.to_string(),
                    value: v.clone(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let Some(v) = self.values.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e: T::Err| ConfigError::Value {
                    key: key.to_string(),
                    value: s.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn list_or<T>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.get_list(key)?.unwrap_or(default))
    }

    /// Fails if any key is outside `allowed`.
    pub fn check_keys(&self, experiment: &str, allowed: &[&str]) -> Result<(), ConfigError> {
        let unknown: Vec<String> = self
            .values
            .keys()
            .filter(|k| !allowed.contains(&k.as_str()))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Unknown {
                experiment: experiment.to_string(),
                keys: unknown,
            })
        }
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// How far an experiment is shrunk from its full size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Dimensions ÷10, data ÷3, 10 repetitions.
    Desk,
    Paper,
    /// Dimensions, data and repetitions all multiplied by the factor.
    Fraction(f64),
}

impl Scale {
    pub fn dims(self, full: usize) -> usize {
        match self {
            Scale::Desk => (full / 10).max(1),
            Scale::Paper => full,
            Scale::Fraction(f) => ((full as f64 * f).round() as usize).max(1),
        }
    }

    pub fn data(self, full: usize) -> usize {
        match self {
            Scale::Desk => (full / 3).max(1),
            Scale::Paper => full,
            Scale::Fraction(f) => ((full as f64 * f).round() as usize).max(1),
        }
    }

    pub fn repetitions(self, full: usize) -> usize {
        match self {
            Scale::Desk => 10.min(full).max(1),
            Scale::Paper => full,
            Scale::Fraction(f) => ((full as f64 * f).round() as usize).max(1),
        }
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => match other.parse::<f64>() {
                Ok(f) if f > 0.0 && f <= 1.0 => Ok(Scale::Fraction(f)),
                _ => Err(format!("scale must be desk, paper or a fraction in (0, 1], got {other:?}")),
            },
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Desk => f.write_str("desk"),
            Scale::Paper => f.write_str("paper"),
            Scale::Fraction(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_lists() {
        let c = Config::parse("# sweep\ndepths = 2, 3,4\n\nlr=0.01\ntarget = type1\n", "t").unwrap();
        assert_eq!(c.get_list::<usize>("depths").unwrap().unwrap(), vec![2, 3, 4]);
        assert_eq!(c.get_or("lr", 1.0).unwrap(), 0.01);
        assert_eq!(c.raw("target"), Some("type1"));
        assert_eq!(c.get_or("epochs", 7usize).unwrap(), 7);
        assert!(c.check_keys("x", &["depths", "lr", "target"]).is_ok());
        assert!(c.check_keys("x", &["depths"]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Config::parse("novalue\n", "t"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(Config::parse("a=1\na=2\n", "t"), Err(ConfigError::Duplicate(_))));
        let c = Config::parse("lr = fast", "t").unwrap();
        assert!(c.get::<f64>("lr").is_err());
    }

    #[test]
    fn round_trips_text() {
        let c = Config::parse("b = 2\na = x, y\n", "t").unwrap();
        assert_eq!(Config::parse(&c.to_text(), "t").unwrap(), c);
    }

    #[test]
    fn scales() {
        assert_eq!("desk".parse::<Scale>().unwrap(), Scale::Desk);
        assert_eq!("0.5".parse::<Scale>().unwrap(), Scale::Fraction(0.5));
        assert!("0".parse::<Scale>().is_err());
        assert!("2".parse::<Scale>().is_err());
        assert_eq!(Scale::Desk.dims(1000), 100);
        assert_eq!(Scale::Desk.data(30000), 10000);
        assert_eq!(Scale::Desk.repetitions(100), 10);
        assert_eq!(Scale::Paper.dims(1000), 1000);
        assert_eq!(Scale::Fraction(0.5).repetitions(100), 50);
    }
}
