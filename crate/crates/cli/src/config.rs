//! Flat `key = value` run configuration. Command-line flags win over file
//! values, which win over defaults. Every resolved value is recorded so the
//! effective configuration can be written next to the outputs and fed back
//! with `--config`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use snn_core::{Error, Result};

pub const ECHO_FILE: &str = "config.txt";

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Settings::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value", n + 1)))?;
            file.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Settings {
            file,
            effective: BTreeMap::new(),
        })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    /// Flag, then file, then default.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        let v = match flag {
            Some(v) => v,
            None => self.from_file(key)?.unwrap_or(default),
        };
        self.effective.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Like [`get`](Self::get) without a default; absent values stay absent.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &v {
            self.effective.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(p) = &v {
            self.effective.insert(key.to_string(), p.display().to_string());
        }
        Ok(v)
    }

    pub fn required_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| Error::Config(format!("missing required option --{key}")))
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        self.effective.insert(key.to_string(), value.to_string());
    }

    /// Rejects configuration-file keys that no option consumed.
    pub fn check_unused(&self) -> Result<()> {
        let unused: Vec<&str> = self
            .file
            .keys()
            .filter(|k| !self.effective.contains_key(*k))
            .map(|k| k.as_str())
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown configuration keys: {}", unused.join(", "))))
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.effective {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// Writes the effective configuration into `dir`.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        let path = dir.join(ECHO_FILE);
        std::fs::write(&path, self.render()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut s = Settings::parse("# run\ngroups = 300\nseed=4\n", "t").unwrap();
        assert_eq!(s.get("groups", Some(10usize), 2000).unwrap(), 10);
        assert_eq!(s.get("seed", None, 0u64).unwrap(), 4);
        assert_eq!(s.get("level", None, 2u32).unwrap(), 2);
        assert!(s.render().contains("groups = 10\n"));
        s.check_unused().unwrap();
    }

    #[test]
    fn bad_values_and_unknown_keys_are_usage_errors() {
        let mut s = Settings::parse("groups = many\nbogus = 1\n", "t").unwrap();
        assert!(matches!(s.get("groups", None, 1usize), Err(Error::Config(_))));
        assert!(matches!(s.check_unused(), Err(Error::Config(_))));
        assert!(Settings::parse("novalue\n", "t").is_err());
        let mut s = Settings::default();
        assert!(s.required_path("data", None).is_err());
    }
}
