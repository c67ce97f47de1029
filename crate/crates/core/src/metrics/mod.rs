//! Eye-movement statistics, population sparseness and energy accounting.

mod energy;
mod sparseness;
mod summary;

pub use energy::{EnergyModel, Layer, LayerActivity, ann_flops, parse_architecture, policy_activity, policy_as_ann, snn_energy};
pub use sparseness::{Sparseness, population_sparseness};
pub use summary::{
    AMPLITUDE_BIN_DEG, DENSITY_CELL_DEG, DENSITY_SPAN_DEG, ECCENTRICITY_BIN_DEG, EccentricityBin, FixationDensity, Histogram, SearchSummary, median,
    ring_density, summarize,
};
