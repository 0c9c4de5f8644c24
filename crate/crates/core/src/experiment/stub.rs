//! A stand-in trainer that "predicts" the ground truth.
//!
//! It reads a manifest exactly as a real trainer would and writes the ground
//! truth masks as probability maps, so every recall is 1. Used to exercise
//! the orchestration without a deep-learning stack.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::collect::expected_ids;
use crate::experiment::manifest::{ManifestMode, RunManifest};
use crate::ingest::load_mask;

pub fn run_stub_trainer(manifest_path: &Path) -> Result<()> {
    let m = RunManifest::read(manifest_path)?;
    m.validate_inputs()?;
    if m.mode == ManifestMode::Train {
        for p in [&m.out_weights, &m.out_log] {
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        fs::write(&m.out_weights, format!("stub weights for {}\n", m.name))
            .map_err(|e| Error::io(&m.out_weights, e))?;
        fs::write(&m.out_log, "epoch,train_loss,val_loss\n").map_err(|e| Error::io(&m.out_log, e))?;
    }
    fs::create_dir_all(&m.out_predictions).map_err(|e| Error::io(&m.out_predictions, e))?;
    for id in expected_ids(&m)? {
        let gt = load_mask(&m.masks_dir.join(format!("{id}.png")))?;
        gt.save_png(&m.out_predictions.join(format!("{id}.png")))?;
    }
    Ok(())
}
