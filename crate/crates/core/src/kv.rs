//! Flat `key = value` text format shared by run configs and synthetic task specs.
//!
//! One pair per line; `#` starts a comment; blank lines are ignored. Keys may
//! appear at most once.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {line:?}",
                    i + 1
                ))
            })?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {k:?}",
                    i + 1
                )));
            }
        }
        Ok(KeyValues { map })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("key {key:?}: cannot parse {v:?}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key {key:?}")))
    }

    /// Comma-separated list; an absent key gives `None`.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("key {key:?}: cannot parse item {s:?}")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// `true/false`, `yes/no` or `1/0`.
    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "yes" | "1") => Ok(true),
            Some("false" | "no" | "0") => Ok(false),
            Some(v) => Err(Error::Config(format!(
                "key {key:?}: expected a boolean, got {v:?}"
            ))),
        }
    }

    /// Error on any key outside `allowed`, catching typos in config files.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}
