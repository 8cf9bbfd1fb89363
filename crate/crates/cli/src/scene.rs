use std::path::{Path, PathBuf};

use hybridsci_core::io::{import_pgm, load_tensor};
use hybridsci_core::{Frame, VideoCube};

use crate::error::{AtStage, CliResult, Failure, Stage};

/// Loads a scene from a KHCV video cube or a directory of PGM frames taken
/// in lexicographic file-name order.
pub fn load_scene(path: &Path) -> CliResult<VideoCube> {
    if path.is_dir() {
        let frames = pgm_sequence(path)?
            .iter()
            .map(import_pgm)
            .collect::<hybridsci_core::Result<Vec<Frame>>>()
            .at(Stage::Scene)?;
        if frames.is_empty() {
            return Err(Failure::Data(format!("no .pgm frames in {}", path.display()))).at(Stage::Scene);
        }
        VideoCube::from_frames(&frames).at(Stage::Scene)
    } else {
        load_tensor(path).and_then(|t| t.into_video()).at(Stage::Scene)
    }
}

fn pgm_sequence(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| Failure::Data(format!("cannot list {}: {e}", dir.display())))
        .at(Stage::Scene)?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Failure::Data(format!("cannot list {}: {e}", dir.display())))
            .at(Stage::Scene)?
            .path();
        if path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("pgm")) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}
