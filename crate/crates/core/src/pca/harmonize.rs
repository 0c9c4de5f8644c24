use std::collections::HashSet;

use log::{info, warn};

use crate::error::{Error, Result};
use crate::ingest::{flatten, Channel, DatasetRecord, Image};
use crate::pca::select::{select_components, ComponentSelection, SelectionPolicy, VARIANCE_BAND};
use crate::pca::{fit_pca, PcaModel};

/// Which records the PCA basis is fitted on. Every record is reconstructed
/// regardless.
#[derive(Debug, Clone, Default)]
pub enum FitScope {
    #[default]
    All,
    Subset(HashSet<String>),
}

#[derive(Debug, Clone, Default)]
pub struct HarmonizeOptions {
    pub policy: SelectionPolicy,
    pub fit_on: FitScope,
}

#[derive(Debug, Clone)]
pub struct Harmonized {
    pub records: Vec<DatasetRecord>,
    pub selection: ComponentSelection,
    pub model: PcaModel,
}

/// Replaces every image with its rank-k PCA reconstruction, clamped to
/// `[0, 1]` and quantized to 8 bits. Masks and ids pass through.
pub fn harmonize_dataset(records: &[DatasetRecord], opts: &HarmonizeOptions) -> Result<Harmonized> {
    if records.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "harmonization needs at least 2 records, got {}",
            records.len()
        )));
    }
    let all = flatten(records, Channel::Images)?;
    let fit_matrix = match &opts.fit_on {
        FitScope::All => all.clone(),
        FitScope::Subset(ids) => all.select_rows(|id| ids.contains(id)),
    };
    let model = fit_pca(&fit_matrix)?;
    let selection = select_components(model.eigenvalues(), opts.policy)?;
    info!(
        "keeping {} of {} components ({:.1}% variance)",
        selection.k,
        model.k_max(),
        100.0 * selection.achieved_variance
    );
    if !selection.in_variance_band() {
        warn!(
            "achieved variance {:.3} outside [{}, {}]",
            selection.achieved_variance, VARIANCE_BAND.0, VARIANCE_BAND.1
        );
    }
    let recon = match opts.fit_on {
        FitScope::All => model.reconstruct(selection.k)?,
        FitScope::Subset(_) => model.reconstruct_samples(&all, selection.k)?,
    };
    let out = records
        .iter()
        .zip(recon.rows_iter())
        .map(|(rec, row)| {
            let image = Image::from_unclamped(rec.image.width(), rec.image.height(), row)?.quantized();
            Ok(DatasetRecord {
                id: rec.id.clone(),
                image,
                mask: rec.mask.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Harmonized {
        records: out,
        selection,
        model,
    })
}
