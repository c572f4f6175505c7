//! Flat key = value configuration, merged under command-line flags.
//!
//! Each command has a settings struct with defaults. A config file may set
//! any of its keys; flags given on the command line win over the file. The
//! merged settings are written back out next to the command's outputs.

use std::path::{Path, PathBuf};

use edpls::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Keys understood by at least one command. A shared config file may carry
/// keys for other commands; anything outside this list is a typo.
const KNOWN_KEYS: &[&str] = &[
    "n",
    "m",
    "seed",
    "output",
    "header",
    "input",
    "test_input",
    "test_output",
    "state_output",
    "response_col",
    "no_response",
    "k",
    "k_max",
    "epsilon",
    "epsilons",
    "delta",
    "pipeline",
    "placement",
    "model",
    "pipeline_state",
    "truth",
    "mode",
    "folds",
    "test_fraction",
    "repeats",
];

pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let table: toml::Table = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for (key, value) in &table {
        if value.is_table() {
            return Err(Error::Config(format!(
                "{}: `{key}` is a table; the config file is flat key = value pairs",
                path.display()
            )));
        }
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("{}: unknown key `{key}`", path.display())));
        }
    }
    Ok(table)
}

/// A command's settings: serde-able, with defaults and a fixed key set.
pub trait Settings: Serialize + DeserializeOwned + Default {
    const KEYS: &'static [&'static str];
}

/// Defaults, then the config file, then the flags that were actually given.
///
/// `flags` serializes with unset options omitted, so only explicit flags
/// override. Keys from the file that `S` does not know are dropped, which
/// lets one file serve several commands.
pub fn resolve<S: Settings, F: Serialize>(config: Option<&Path>, flags: &F) -> Result<S> {
    let mut merged = to_table(&S::default())?;
    if let Some(path) = config {
        for (k, v) in read_table(path)? {
            if S::KEYS.contains(&k.as_str()) {
                merged.insert(k, v);
            }
        }
    }
    for (k, v) in to_table(flags)? {
        merged.insert(k, v);
    }
    merged
        .try_into()
        .map_err(|e| Error::Config(format!("invalid setting: {e}")))
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    toml::Table::try_from(value).map_err(|e| Error::Config(e.to_string()))
}

/// Write the resolved settings as `config.toml` inside `dir`.
pub fn write_into_dir<S: Serialize>(dir: &Path, command: &str, settings: &S) -> Result<PathBuf> {
    write(&dir.join("config.toml"), command, settings)
}

/// Write the resolved settings next to a single output file, as
/// `<file name>.config.toml`.
pub fn write_beside<S: Serialize>(output: &Path, command: &str, settings: &S) -> Result<PathBuf> {
    let mut name = output
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "output".into());
    name.push(".config.toml");
    write(&output.with_file_name(name), command, settings)
}

fn write<S: Serialize>(path: &Path, command: &str, settings: &S) -> Result<PathBuf> {
    let body = toml::to_string(settings).map_err(|e| Error::Config(e.to_string()))?;
    let text = format!("# resolved settings for `edpls {command}`\n{body}");
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        k: usize,
        delta: f64,
        epsilon: Option<f64>,
    }

    impl Settings for Demo {
        const KEYS: &'static [&'static str] = &["k", "delta", "epsilon"];
    }

    impl Default for Demo {
        fn default() -> Self {
            Self {
                k: 3,
                delta: 0.01,
                epsilon: None,
            }
        }
    }

    #[derive(Serialize, Default)]
    struct Flags {
        k: Option<usize>,
        epsilon: Option<f64>,
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "k = 5\ndelta = 0.1\nepsilon = 2.0\nfolds = 4\n").unwrap();
        let got: Demo = resolve(Some(&path), &Flags::default()).unwrap();
        assert_eq!(
            got,
            Demo {
                k: 5,
                delta: 0.1,
                epsilon: Some(2.0)
            }
        );
        let got: Demo = resolve(
            Some(&path),
            &Flags {
                k: Some(7),
                epsilon: None,
            },
        )
        .unwrap();
        assert_eq!(got.k, 7);
        assert_eq!(got.epsilon, Some(2.0));
        let got: Demo = resolve(None, &Flags::default()).unwrap();
        assert_eq!(got, Demo::default());
    }

    #[test]
    fn unknown_and_nested_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "kk = 5\n").unwrap();
        assert!(matches!(read_table(&path), Err(Error::Config(_))));
        std::fs::write(&path, "[fit]\nk = 5\n").unwrap();
        assert!(matches!(read_table(&path), Err(Error::Config(_))));
    }

    #[test]
    fn wrong_type_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "k = \"three\"\n").unwrap();
        let got: Result<Demo> = resolve(Some(&path), &Flags::default());
        assert!(matches!(got, Err(Error::Config(_))));
    }
}
