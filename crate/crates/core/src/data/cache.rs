use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scene::Scene;
use crate::error::{Error, Result};

const MAGIC: [u8; 8] = *b"HFSCENE\0";
const VERSION: u32 = 1;
/// Field layout of [`Scene`]; any change to it must change this string.
const SCHEMA: &str = "scene{name:str,recording:str,vehicle_ids:[u64],dt:f64,start_frame:i64,\
history:[[[f64;2]]],future:[[[f64;2]]],frame{origin:[f64;2],rotation:f64}}";

/// Hash of the cached layout, embedded in every cache file.
pub fn schema_hash() -> [u8; 32] {
    Sha256::digest(SCHEMA.as_bytes()).into()
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    magic: [u8; 8],
    version: u32,
    schema: [u8; 32],
    scenes: Vec<Scene>,
}

pub fn save_scene_cache(path: &Path, scenes: &[Scene]) -> Result<()> {
    let file = CacheFile {
        magic: MAGIC,
        version: VERSION,
        schema: schema_hash(),
        scenes: scenes.to_vec(),
    };
    let bytes = bincode::serialize(&file).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_scene_cache(path: &Path) -> Result<Vec<Scene>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::data(path, "not a scene cache"));
    }
    let file: CacheFile =
        bincode::deserialize(&bytes).map_err(|e| Error::data(path, format!("corrupt scene cache: {e}")))?;
    if file.version != VERSION {
        return Err(Error::data(
            path,
            format!("scene cache version {} unsupported", file.version),
        ));
    }
    if file.schema != schema_hash() {
        return Err(Error::data(path, "scene cache schema hash mismatch"));
    }
    Ok(file.scenes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::scene::NormalizationFrame;

    #[test]
    fn round_trip_and_rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.hfsc");
        let scene = Scene {
            name: "a".into(),
            recording: "r".into(),
            vehicle_ids: vec![3, 4],
            dt: 0.1,
            start_frame: 7,
            history: vec![vec![[0.1, -0.2]; 3]; 2],
            future: vec![vec![[1.0 / 3.0, 2.0]; 2]; 2],
            frame: NormalizationFrame {
                origin: [1.5, 2.5],
                rotation: 0.3,
            },
        };
        save_scene_cache(&path, std::slice::from_ref(&scene)).unwrap();
        assert_eq!(load_scene_cache(&path).unwrap(), vec![scene]);

        std::fs::write(&path, b"vehicle_id,frame\n").unwrap();
        assert!(matches!(load_scene_cache(&path), Err(Error::Data { .. })));
    }
}
