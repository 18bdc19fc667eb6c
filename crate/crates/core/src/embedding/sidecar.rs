//! Optional human-readable metadata stored next to a dataset file.

use std::ffi::OsString;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractorInfo {
    pub model: String,
    /// Where in the network features were taken, e.g. "pre_logits_after_final_norm".
    pub tap_point: String,
    #[serde(default)]
    pub preprocessing: String,
    #[serde(default)]
    pub checkpoint_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub task_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<ExtractorInfo>,
    /// Unrecognised keys are kept so that rewriting a sidecar loses nothing.
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// `train.embd` → `train.embd.meta.json`.
pub fn sidecar_path(dataset: impl AsRef<Path>) -> PathBuf {
    let mut name: OsString = dataset.as_ref().as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Returns `Ok(None)` when the sidecar does not exist.
pub fn read_sidecar(dataset: impl AsRef<Path>) -> Result<Option<DatasetMeta>> {
    match fs::read(sidecar_path(dataset)) {
        Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
        Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn write_sidecar(dataset: impl AsRef<Path>, meta: &DatasetMeta) -> Result<()> {
    let text = serde_json::to_string_pretty(meta)?;
    fs::write(sidecar_path(dataset), text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_suffix() {
        assert_eq!(
            sidecar_path("data/train.embd"),
            PathBuf::from("data/train.embd.meta.json")
        );
    }

    #[test]
    fn absent_is_none_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.embd");
        assert_eq!(read_sidecar(&path).unwrap(), None);

        let mut meta = DatasetMeta {
            class_names: vec!["apple".into(), "pear".into()],
            extractor: Some(ExtractorInfo {
                model: "vit_base_patch16_224_in21k".into(),
                tap_point: "pre_logits_after_final_norm".into(),
                ..Default::default()
            }),
            ..Default::default()
        };
        meta.extra.insert("source".into(), "unit-test".into());
        write_sidecar(&path, &meta).unwrap();
        assert_eq!(read_sidecar(&path).unwrap(), Some(meta));
    }
}
