//! `key = value` configuration files. Command-line flags win over file
//! entries; entries a command never asks for are reported as errors.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim().replace('_', "-");
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Failure::Usage(format!("config line {}: duplicate key {key}", i + 1)));
            }
        }
        Ok(Self { entries, used: RefCell::default() })
    }

    /// Flag value if given, else the file entry, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.lookup(flag, key)?.unwrap_or(default))
    }

    pub fn lookup<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Failure::Usage(format!("config key {key} = {v}: {e}"))),
        }
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, Failure> {
        Ok(flag || self.lookup::<bool>(None, key)?.unwrap_or(false))
    }

    pub fn check_all_used(&self) -> Result<(), Failure> {
        let used = self.used.borrow();
        let unknown: Vec<&str> =
            self.entries.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Failure::Usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }
}
