//! JSON files: loading with position-annotated errors, saving with the
//! 17-digit writer, and the run envelope written by the CLI.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::dp_norm::MixedTensor;
use crate::error::{Error, Result};
use crate::report::to_json_string;
use crate::tensor::{MultilinearOperator, PairConfiguration};

/// `git describe` of the build, or the crate version when git was unavailable.
pub const VERSION: &str = env!("LIPNORM_VERSION");

pub const TOOL: &str = "lipnorm";

/// Parse `text` as `T`. `origin` names the source in error messages.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| json_error(e, origin))
}

fn json_error(e: serde_json::Error, origin: &str) -> Error {
    match e.classify() {
        Category::Data => Error::Schema(format!("{origin}: {e}")),
        Category::Io => Error::Io { path: origin.into(), source: e.into() },
        Category::Syntax | Category::Eof => {
            let full = e.to_string();
            let message = match full.rfind(" at line ") {
                Some(i) => full[..i].to_string(),
                None => full,
            };
            Error::Json { path: origin.into(), line: e.line(), column: e.column(), message }
        }
    }
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: name.clone(), source })?;
    parse_json(&text, &name)
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(value)).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn load_operator(path: impl AsRef<Path>) -> Result<MultilinearOperator> {
    load_json(path)
}

pub fn load_configuration(path: impl AsRef<Path>) -> Result<PairConfiguration> {
    load_json(path)
}

pub fn load_mixed(path: impl AsRef<Path>) -> Result<MixedTensor> {
    load_json(path)
}

/// Wrapper written for every CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<C, R> {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: C,
    pub result: R,
}

impl<C, R> RunReport<C, R> {
    pub fn new(command: impl Into<String>, config: C, result: R) -> Self {
        RunReport { tool: TOOL.into(), version: VERSION.into(), command: command.into(), config, result }
    }
}

pub fn save_report<C: Serialize, R: Serialize>(report: &RunReport<C, R>, path: impl AsRef<Path>) -> Result<()> {
    save_json(report, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_json::<MultilinearOperator>("{\n  \"shape\": [2, 1],\n  \"data\": [1.0,, 2.0]\n}", "t.json").unwrap_err();
        match err {
            Error::Json { line, column, .. } => assert_eq!((line, column), (3, 16)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn length_mismatch_is_a_schema_error() {
        let err = parse_json::<MultilinearOperator>(r#"{"shape": [2, 2], "data": [1.0, 2.0, 3.0]}"#, "t.json").unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err:?}");
    }

    #[test]
    fn operator_round_trip_is_bit_exact() {
        let data: Vec<f64> = (0..8).map(|i| (i as f64 + 0.1).sqrt() / 3.0 - 0.7).collect();
        let t = MultilinearOperator::euclidean(DenseTensor::new(vec![2, 2, 2], data).unwrap()).unwrap();
        let dir = std::env::temp_dir().join(format!("lipnorm-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.json");
        save_json(&t, &path).unwrap();
        let back = load_operator(&path).unwrap();
        let bits = |m: &MultilinearOperator| m.kernel().data().iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        assert_eq!(bits(&back), bits(&t));
        assert_eq!(back, t);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_operator("/nonexistent/x.json"), Err(Error::Io { .. })));
    }
}
