use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_features, FrameFeatureSequence, Modality};
use crate::error::{Error, Result};

/// One AV clip: paths to its two feature files plus optional external
/// boundary annotations keyed by segmenter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub music: PathBuf,
    pub video: PathBuf,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub boundaries: BTreeMap<String, PathBuf>,
}

/// Catalog manifest, serialized as a JSON array of entries. Relative paths
/// are resolved against the manifest's own directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClipManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl ClipManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            entries,
            base_dir: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: ClipManifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf);
        manifest.check_unique_ids()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = Some(dir.into());
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn load_pair(&self, entry: &ManifestEntry) -> Result<(FrameFeatureSequence, FrameFeatureSequence)> {
        let music = load_features(self.resolve(&entry.music), &entry.clip_id)?;
        let video = load_features(self.resolve(&entry.video), &entry.clip_id)?;
        if music.modality != Modality::Music || video.modality != Modality::Video {
            return Err(Error::invariant(format!(
                "{}: modality tags do not match manifest slots",
                entry.clip_id
            )));
        }
        Ok((music, video))
    }

    pub fn annotation_path(&self, entry: &ManifestEntry, segmenter: &str) -> Option<PathBuf> {
        entry.boundaries.get(segmenter).map(|p| self.resolve(p))
    }

    fn check_unique_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.clip_id.as_str()) {
                return Err(Error::invariant(format!("duplicate clip id {}", e.clip_id)));
            }
        }
        Ok(())
    }

    /// Full validation: unique ids, every file loadable, both modalities of a
    /// clip cover the same duration within one frame, and every annotation
    /// parses and names the right clip. Returns one message per problem.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if let Err(e) = self.check_unique_ids() {
            problems.push(e.to_string());
        }
        for entry in &self.entries {
            match self.load_pair(entry) {
                Ok((m, v)) => {
                    if m.num_frames().abs_diff(v.num_frames()) > 1 {
                        problems.push(format!(
                            "{}: music has {} frames, video has {}",
                            entry.clip_id,
                            m.num_frames(),
                            v.num_frames()
                        ));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", entry.clip_id)),
            }
            for (name, path) in &entry.boundaries {
                match BoundaryAnnotation::load(self.resolve(path)) {
                    Ok(a) if a.clip_id != entry.clip_id => {
                        problems.push(format!("{}: annotation {name} names clip {}", entry.clip_id, a.clip_id))
                    }
                    Ok(_) => {}
                    Err(e) => problems.push(format!("{}: annotation {name}: {e}", entry.clip_id)),
                }
            }
        }
        problems
    }
}

/// External segment boundary file: times in seconds, ascending, excluding 0
/// and the clip end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAnnotation {
    pub clip_id: String,
    pub segmenter: String,
    pub boundaries_s: Vec<f64>,
}

impl BoundaryAnnotation {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::save_features;
    use ndarray::Array2;

    fn write_clip(dir: &Path, id: &str, music_frames: usize, video_frames: usize) -> ManifestEntry {
        let m = FrameFeatureSequence::at_1hz(id, Modality::Music, Array2::ones((music_frames, 2))).unwrap();
        let v = FrameFeatureSequence::at_1hz(id, Modality::Video, Array2::ones((video_frames, 3))).unwrap();
        save_features(&m, dir.join(format!("{id}.m.fvec"))).unwrap();
        save_features(&v, dir.join(format!("{id}.v.fvec"))).unwrap();
        ManifestEntry {
            clip_id: id.into(),
            music: format!("{id}.m.fvec").into(),
            video: format!("{id}.v.fvec").into(),
            boundaries: BTreeMap::new(),
        }
    }

    #[test]
    fn json_layout() {
        let mut b = BTreeMap::new();
        b.insert("olda".to_string(), PathBuf::from("a.json"));
        let m = ClipManifest::new(vec![ManifestEntry {
            clip_id: "x".into(),
            music: "m.fvec".into(),
            video: "v.fvec".into(),
            boundaries: b,
        }]);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(
            v,
            serde_json::json!([{"clip_id":"x","music":"m.fvec","video":"v.fvec","boundaries":{"olda":"a.json"}}])
        );
    }

    #[test]
    fn validate_reports_duration_mismatch_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write_clip(dir.path(), "a", 10, 11);
        let bad = write_clip(dir.path(), "b", 10, 12);
        let mut missing = ok.clone();
        missing.clip_id = "c".into();
        missing.music = "nope.fvec".into();
        let manifest = ClipManifest::new(vec![ok, bad, missing]);
        let path = dir.path().join("manifest.json");
        manifest.save(&path).unwrap();
        let loaded = ClipManifest::load(&path).unwrap();
        let problems = loaded.validate();
        assert_eq!(problems.len(), 2, "{problems:?}");
        assert!(problems[0].starts_with("b:"));
        assert!(problems[1].starts_with("c:"));
    }

    #[test]
    fn duplicate_ids_are_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_clip(dir.path(), "a", 4, 4);
        let path = dir.path().join("manifest.json");
        ClipManifest::new(vec![a.clone(), a]).save(&path).unwrap();
        assert!(ClipManifest::load(&path).is_err());
    }
}
