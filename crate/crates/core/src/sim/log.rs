//! JSON-lines log of simulator actions, one record per placement or grasp.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChunkPlacement, GraspAction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum ActionParams {
    Place(ChunkPlacement),
    Grasp(GraspAction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub step: usize,
    #[serde(flatten)]
    pub action: ActionParams,
    pub pre_cloud_file: Option<String>,
    pub post_cloud_file: String,
}

pub struct EpisodeLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EpisodeLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(EpisodeLog { path, out: BufWriter::new(file) })
    }

    pub fn append(&mut self, record: &EpisodeRecord) -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{Cell, GridGeometry};

    #[test]
    fn records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episode.jsonl");
        let place = ChunkPlacement::new(&GridGeometry::default(), Cell::new(1, 2, 0)).unwrap();
        let recs = vec![
            EpisodeRecord {
                step: 0,
                action: ActionParams::Place(place),
                pre_cloud_file: None,
                post_cloud_file: "step_0000.ply".into(),
            },
            EpisodeRecord {
                step: 1,
                action: ActionParams::Grasp(GraspAction { x: 0.01, y: 0.02, z: 0.0, rot_z: 0.1, aperture: 0.01 }),
                pre_cloud_file: Some("step_0000.ply".into()),
                post_cloud_file: "step_0001.ply".into(),
            },
        ];
        let mut log = EpisodeLog::create(&path).unwrap();
        for r in &recs {
            log.append(r).unwrap();
        }
        log.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"kind\":\"place\""));
        assert_eq!(read_log(&path).unwrap(), recs);
    }
}
