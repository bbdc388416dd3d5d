//! Synthetic ellipsoid cases written as NIfTI files plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use slicewise_core::nifti::{save_mask, save_volume};
use slicewise_core::volume::{make_phantom, Dims, PhantomSpec, DEFAULT_AXIS};

use crate::manifest::CaseManifestEntry;
use crate::BenchError;

pub const PHANTOM_DIMS: Dims = [64, 64, 64];

/// Spec of the `i`-th phantom of a seeded set. Case 0 is the plain centered
/// phantom; later cases shrink the ellipsoid and shift it slightly.
pub fn phantom_spec(i: usize, seed: u64) -> PhantomSpec {
    let mut spec = PhantomSpec::centered(PHANTOM_DIMS, seed.wrapping_add(i as u64));
    let scale = 1.0 - 0.08 * (i % 4) as f64;
    for a in &mut spec.semi_axes {
        *a *= scale;
    }
    let shift = [(i % 3) as f64 - 1.0, ((i / 3) % 3) as f64 - 1.0, 0.0];
    if i > 0 {
        for (c, d) in spec.center.iter_mut().zip(shift) {
            *c += 2.0 * d;
        }
    }
    spec
}

/// Writes `count` phantoms to `dir` and returns the manifest (also written
/// to `dir/manifest.json` with relative paths).
pub fn write_phantoms(
    dir: impl AsRef<Path>,
    count: usize,
    seed: u64,
) -> Result<Vec<CaseManifestEntry>, BenchError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let spec = phantom_spec(i, seed);
        let (vol, mask) =
            make_phantom(&spec).map_err(|e| BenchError::Config(format!("phantom {i}: {e}")))?;
        let id = format!("phantom_{i:03}");
        let image = PathBuf::from(format!("{id}_image.nii.gz"));
        let label = PathBuf::from(format!("{id}_label.nii.gz"));
        let nifti =
            |e: slicewise_core::nifti::NiftiError| BenchError::Report(format!("writing {id}: {e}"));
        save_volume(&vol, dir.join(&image)).map_err(nifti)?;
        save_mask(&mask, &vol, dir.join(&label)).map_err(nifti)?;
        entries.push(CaseManifestEntry {
            case_id: id,
            image_path: image,
            label_path: label,
            axis: DEFAULT_AXIS,
            window: None,
            modality_tag: Some("MR".into()),
        });
    }
    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&entries).expect("manifest serializes");
    fs::write(&manifest, text).map_err(io(&manifest))?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_spec_is_valid_and_first_is_centered() {
        for i in 0..12 {
            phantom_spec(i, 42).validate().unwrap();
        }
        assert_eq!(phantom_spec(0, 42), PhantomSpec::centered(PHANTOM_DIMS, 42));
    }
}
