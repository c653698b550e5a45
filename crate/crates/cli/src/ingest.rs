//! `levlab ingest`: retrieval from campaign files on disk.

use std::path::Path;

use levlab_core::io::{read_campaign, retrieved_mode_to_json};
use levlab_core::response::CampaignMode;
use levlab_core::retrieval::{fit_modes, retrieve_eigvec_with, ModeSelector, RetrieveOptions};
use levlab_core::{Campaign64, RetrievedMode64};
use log::info;

use crate::bundle::ArtifactWriter;
use crate::error::{CliError, Result};

/// Reads the campaign behind `manifest`, checks it is a `mode` campaign and
/// retrieves either the mode nearest `target` or every fitted mode. Each
/// mode is written as `<mode>_mode_<k>.json` below `out_dir`.
pub fn ingest(
    manifest: &Path,
    mode: CampaignMode,
    target: Option<f64>,
    out_dir: &Path,
) -> Result<Vec<RetrievedMode64>> {
    let c: Campaign64 = read_campaign(manifest)?;
    if c.mode != mode {
        return Err(CliError::config(format!(
            "{} holds a {} campaign but --retrieve {} was requested",
            manifest.display(),
            c.mode,
            mode
        )));
    }
    info!("{} campaign with {} spectra on {} points", c.mode, c.dim(), c.grid().len());
    let opts = RetrieveOptions::default();
    let modes = match target {
        Some(w) => vec![retrieve_eigvec_with(&c, ModeSelector::Frequency(w), &opts)?.0],
        None => fit_modes(&c, c.dim(), None)?
            .1
            .into_iter()
            .map(|m| m.normalized().unwrap_or(m))
            .collect(),
    };
    let mut w = ArtifactWriter::new(out_dir)?;
    for m in &modes {
        info!("mode {} at {:.6} rad/s, quality {:.3e}", m.mode_idx, m.omega_re, m.quality);
        w.write(&format!("{}_mode_{}.json", mode, m.mode_idx), retrieved_mode_to_json(m))?;
    }
    Ok(modes)
}
