use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slicewise_core::volume::DEFAULT_AXIS;
use slicewise_core::WindowSpec;

use crate::BenchError;

/// One case of a benchmark manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseManifestEntry {
    pub case_id: String,
    pub image_path: PathBuf,
    pub label_path: PathBuf,
    #[serde(default = "default_axis")]
    pub axis: usize,
    /// Falls back to the preset for `modality_tag` (or the image's own tag).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality_tag: Option<String>,
}

fn default_axis() -> usize {
    DEFAULT_AXIS
}

impl CaseManifestEntry {
    pub fn window_for(&self, image_modality: &str) -> WindowSpec {
        self.window.unwrap_or_else(|| {
            WindowSpec::for_modality(self.modality_tag.as_deref().unwrap_or(image_modality))
        })
    }
}

/// Reads a manifest. Relative paths are taken relative to the manifest's
/// own directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<CaseManifestEntry>, BenchError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entries: Vec<CaseManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| BenchError::Manifest(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for e in &mut entries {
        if e.image_path.is_relative() {
            e.image_path = base.join(&e.image_path);
        }
        if e.label_path.is_relative() {
            e.label_path = base.join(&e.label_path);
        }
    }
    validate_manifest(&entries)?;
    Ok(entries)
}

pub fn validate_manifest(entries: &[CaseManifestEntry]) -> Result<(), BenchError> {
    if entries.is_empty() {
        return Err(BenchError::Manifest("manifest has no cases".into()));
    }
    let mut seen = HashSet::new();
    for e in entries {
        if !seen.insert(e.case_id.as_str()) {
            return Err(BenchError::Manifest(format!(
                "duplicate case_id `{}`",
                e.case_id
            )));
        }
        if e.axis > 2 {
            return Err(BenchError::Manifest(format!(
                "case `{}`: axis {} is not 0, 1 or 2",
                e.case_id, e.axis
            )));
        }
        if let Some(w) = e.window {
            w.validate()
                .map_err(|err| BenchError::Manifest(format!("case `{}`: {err}", e.case_id)))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(
            &p,
            r#"[{"case_id":"a","image_path":"a.nii.gz","label_path":"/abs/a_gt.nii.gz"},
                {"case_id":"b","image_path":"b.nii","label_path":"b_gt.nii","axis":0,
                 "window":{"mode":"hounsfield","center":40,"width":400}}]"#,
        )
        .unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m[0].image_path, dir.path().join("a.nii.gz"));
        assert_eq!(m[0].label_path, PathBuf::from("/abs/a_gt.nii.gz"));
        assert_eq!(m[0].axis, 2);
        assert_eq!(m[1].window_for("MR"), WindowSpec::CT_DEFAULT);
        assert_eq!(m[0].window_for("MR"), WindowSpec::MR_DEFAULT);
    }

    #[test]
    fn rejects_bad_manifests() {
        let entry = |id: &str, axis| CaseManifestEntry {
            case_id: id.into(),
            image_path: "x".into(),
            label_path: "y".into(),
            axis,
            window: None,
            modality_tag: None,
        };
        assert!(validate_manifest(&[]).is_err());
        assert!(validate_manifest(&[entry("a", 2), entry("a", 1)]).is_err());
        assert!(validate_manifest(&[entry("a", 3)]).is_err());
        assert!(validate_manifest(&[entry("a", 0), entry("b", 1)]).is_ok());
    }
}
