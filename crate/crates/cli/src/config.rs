use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::device::read;
use crate::error::{CliError, CliResult};

/// Environment variable consulted when neither a flag nor the config file sets a seed.
pub const SEED_ENV: &str = "MNL_SEED";

/// Keys accepted in a `--config` JSON file. Each key mirrors the flag of the
/// same name (dashes become underscores); flags given on the command line win.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub device: Option<String>,
    pub state: Option<String>,
    pub k: Option<usize>,
    pub shots: Option<u64>,
    pub harmonics: Option<usize>,
    pub mode: Option<String>,
    pub method: Option<String>,
    pub methods: Option<Vec<String>>,
    pub twirls: Option<usize>,
    pub elimination_mode: Option<String>,
    pub mitigator: Option<String>,
    pub mitigators: Option<Vec<String>>,
    pub repeats: Option<usize>,
    pub phis: Option<usize>,
    pub restarts: Option<usize>,
    pub layers: Option<usize>,
    pub sweeps: Option<usize>,
    pub tol: Option<f64>,
    pub calibration: Option<PathBuf>,
    pub calibration_shots: Option<u64>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub csv_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        serde_json::from_str(&read(path)?).map_err(|e| CliError::from(e).context(path.display()))
    }

    /// Flag, then config file, then `MNL_SEED`, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }
}

/// Flag value if present, else the file value.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

/// Like [`pick`], failing with a config error when neither is set.
pub fn require<T: Clone>(flag: Option<T>, file: &Option<T>, name: &str) -> CliResult<T> {
    pick(flag, file).ok_or_else(|| CliError::config(format!("--{name} is required")))
}

pub fn parse_value<T>(name: &str, s: &str) -> CliResult<T>
where
    T: FromStr,
    T::Err: Display,
{
    s.parse()
        .map_err(|e: T::Err| CliError::config(format!("invalid --{name} '{s}': {e}")))
}

pub fn parse_or<T>(name: &str, value: Option<String>, default: T) -> CliResult<T>
where
    T: FromStr,
    T::Err: Display,
{
    value.map_or(Ok(default), |s| parse_value(name, &s))
}

pub fn positive<T: PartialOrd + Default + Display>(name: &str, v: T) -> CliResult<T> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::config(format!("--{name} must be positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "shots": 10}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            seed: Some(5),
            k: Some(10),
            ..RunConfig::default()
        };
        assert_eq!(file.resolve_seed(Some(9)).unwrap(), 9);
        assert_eq!(file.resolve_seed(None).unwrap(), 5);
        assert_eq!(pick(Some(3), &file.k), Some(3));
        assert_eq!(pick(None, &file.k), Some(10));
        assert!(require::<u64>(None, &None, "shots").is_err());
    }

    #[test]
    fn positivity() {
        assert!(positive("k", 0usize).is_err());
        assert_eq!(positive("k", 4usize).unwrap(), 4);
    }
}
