use std::path::Path;

use serde::Deserialize;

/// Output format of reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Text,
}

/// Settings read from the file named by `SRT_CONFIG`; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub t: Option<usize>,
    pub format: Option<Format>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

/// Resolved precision and output settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    /// Ramification denominator of the working field `Q_p(p^{1/N})`.
    pub n: u32,
    /// Unit precision in powers of `p`.
    pub m: u32,
    /// Series truncation; `None` means `3p + 2`.
    pub t: Option<usize>,
    pub format: Format,
}

impl Default for Config {
    fn default() -> Self {
        Config { n: 40, m: 8, t: None, format: Format::Json }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, String> {
        let mut cfg = Config::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            let file = ConfigFile::parse(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))?;
            cfg.apply(file);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, f: ConfigFile) {
        if let Some(n) = f.n {
            self.n = n;
        }
        if let Some(m) = f.m {
            self.m = m;
        }
        if f.t.is_some() {
            self.t = f.t;
        }
        if let Some(fmt) = f.format {
            self.format = fmt;
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 || self.m == 0 || self.t == Some(0) {
            return Err("N, M and T must be positive".into());
        }
        Ok(())
    }

    pub fn truncation(&self, p: u64) -> usize {
        self.t.unwrap_or(3 * p as usize + 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut c = Config::default();
        assert_eq!(c.truncation(7), 23);
        c.apply(serde_json::from_str(r#"{"n": 60, "t": 9, "format": "text"}"#).unwrap());
        assert_eq!(c, Config { n: 60, m: 8, t: Some(9), format: Format::Text });
        assert!(serde_json::from_str::<ConfigFile>(r#"{"precision": 3}"#).is_err());
        c.m = 0;
        assert!(c.validate().is_err());
    }
}
