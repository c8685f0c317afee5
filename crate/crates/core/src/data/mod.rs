//! Connectome graphs: construction from correlations, synthetic datasets,
//! probabilistic edge removal, stratified splits and the dataset file format.

mod correlation;
mod graph;
mod io;
mod split;
mod synthetic;

pub use correlation::{pearson_correlation, CorrelationMatrix};
pub use graph::{build_graph, drop_edges, ConnectomeGraph};
pub use io::{hex_digest, Dataset, FORMAT_VERSION};
pub use split::{split, split_labels, DatasetSplits, DEFAULT_RATIOS};
pub use synthetic::{generate_synthetic, LabelMode, SyntheticSpec};
