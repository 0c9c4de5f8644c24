//! Per-dataset PCA: fitting, component selection, reconstruction.

pub mod harmonize;
pub mod model;
pub mod select;

pub use harmonize::{harmonize_dataset, FitScope, HarmonizeOptions, Harmonized};
pub use model::{fit_pca, PcaModel};
pub use select::{
    cumulative_explained_variance, kaiser_guttman, scree_csv, scree_export, scree_rows,
    select_components, ComponentSelection, Criterion, ScreeRow, SelectionPolicy,
};
