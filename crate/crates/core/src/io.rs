//! Structure-set files: a JSON array of structure objects.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::chem::{ChemicalSystem, Structure, StructureRecord};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: expected a JSON array of structures")]
    NotAnArray { path: PathBuf },
    #[error("{path}: record {index}: {message}")]
    Record {
        path: PathBuf,
        index: usize,
        message: String,
    },
}

/// Parses a structure set; `system`, when given, must contain every structure.
pub fn parse_structure_set(text: &str, path: &Path, system: Option<&ChemicalSystem>) -> Result<Vec<Structure>, IngestError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Array(items) = value else {
        return Err(IngestError::NotAnArray { path: path.to_path_buf() });
    };
    let record_error = |index: usize, message: String| IngestError::Record {
        path: path.to_path_buf(),
        index,
        message,
    };
    items
        .into_iter()
        .enumerate()
        .map(|(index, item)| {
            let record: StructureRecord = serde_json::from_value(item).map_err(|e| record_error(index, e.to_string()))?;
            let s = Structure::from_record(&record).map_err(|e| record_error(index, e.to_string()))?;
            if let Some(sys) = system {
                sys.check_structure(&s).map_err(|e| record_error(index, e.to_string()))?;
            }
            Ok(s)
        })
        .collect()
}

pub fn read_structure_set(path: &Path, system: Option<&ChemicalSystem>) -> Result<Vec<Structure>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_structure_set(&text, path, system)
}

pub fn structure_set_json(structures: &[Structure]) -> String {
    serde_json::to_string_pretty(structures).expect("structures serialize")
}
