//! Policy files, test-case files and program loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lang::{parse, Name, Stmt, SyntaxError};
use crate::monitor::{Binding, InitState, Mode, Strategy};

/// Sources are marked sensitive at the start of a run; `env` holds the
/// initial bindings. Strategy and mode are defaults for `run`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy {
    #[serde(default)]
    pub sources: Vec<Name>,
    #[serde(default)]
    pub env: BTreeMap<Name, Binding>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub mode: Option<Mode>,
}

/// One test input: bindings layered over the policy's.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    #[serde(default)]
    pub env: BTreeMap<Name, Binding>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

impl LoadError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        LoadError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn format(path: &Path, e: impl ToString) -> Self {
        LoadError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LoadError> {
    let text = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LoadError::format(path, e))
}

impl Policy {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        read_json(path.as_ref())
    }

    pub fn init(&self) -> InitState {
        InitState { env: self.env.clone() }
    }

    /// The policy's bindings overridden by `test`.
    pub fn with_test(&self, test: &TestCase) -> InitState {
        self.init().overlay(&InitState { env: test.env.clone() })
    }
}

impl TestCase {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        read_json(path.as_ref())
    }
}

/// Every `*.json` file directly in `dir`, sorted by file name.
pub fn read_test_dir(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, TestCase)>, LoadError> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| LoadError::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| LoadError::io(dir, e)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"));
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let t = TestCase::read(&p)?;
            Ok((p, t))
        })
        .collect()
}

/// Parses the program at `path`; locations carry only its file name.
pub fn load_program(path: impl AsRef<Path>) -> Result<Stmt, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| LoadError::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(parse(&text, &name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitor::{InitData, Label};

    #[test]
    fn policy_round_trip_and_defaults() {
        let p: Policy = serde_json::from_str(r#"{"sources":["location"],"env":{"location":{"value":15}}}"#).unwrap();
        assert_eq!(p.sources, ["location"]);
        assert_eq!(p.env["location"], Binding::new(15i64, Label::L));
        assert_eq!(p.strategy, None);
        let q: Policy = serde_json::from_str(r#"{"strategy":"nsu","mode":"enforce"}"#).unwrap();
        assert_eq!((q.strategy, q.mode), (Some(Strategy::Nsu), Some(Mode::Enforce)));
        assert!(serde_json::from_str::<Policy>(r#"{"sink":"x"}"#).is_err());
    }

    #[test]
    fn tests_override_policy_bindings() {
        let p: Policy = serde_json::from_str(r#"{"env":{"a":{"value":1},"b":{"value":"x"}}}"#).unwrap();
        let t: TestCase = serde_json::from_str(r#"{"env":{"a":{"value":true,"label":"H"}}}"#).unwrap();
        let init = p.with_test(&t);
        assert_eq!(init.env["a"], Binding::new(true, Label::H));
        assert_eq!(init.env["b"].value, InitData::Str("x".into()));
    }

    #[test]
    fn test_dir_is_sorted_and_filtered() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.json"), r#"{"env":{"x":{"value":2}}}"#).unwrap();
        fs::write(dir.path().join("a.json"), r#"{"env":{"x":{"value":1}}}"#).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let tests = read_test_dir(dir.path()).unwrap();
        let names: Vec<_> = tests
            .iter()
            .map(|(p, _)| p.file_name().unwrap().to_str().unwrap())
            .collect();
        assert_eq!(names, ["a.json", "b.json"]);
    }

    #[test]
    fn program_locations_use_the_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.njs");
        fs::write(&path, "x = 1;\n").unwrap();
        let p = load_program(&path).unwrap();
        assert_eq!(p.loc().unwrap().to_string(), "p.njs:1:1");
        assert!(matches!(
            load_program(dir.path().join("none.njs")),
            Err(LoadError::Io { .. })
        ));
    }
}
