//! Geometry-aware comparison of representational spaces.
//!
//! Representations (embeddings or similarity matrices) are turned into
//! adaptive kNN graphs, annotated with Ollivier-Ricci curvature, evolved by
//! discrete Ricci flow, and compared through flow-metric RDMs, curvature
//! distribution statistics, heat-kernel graph distances and community
//! structure.

pub mod community;
pub mod curvature;
pub mod distances;
mod error;
pub mod flow;
pub mod gmm;
pub mod graph;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod rsa;
pub mod synth;
pub mod transport;

pub use error::{Error, Result};

pub use curvature::{orc_all, orc_edge, shortest_path_matrix, CurvatureMap};
pub use flow::{run_flow, FlowConfig, FlowState};
pub use graph::{build_graph, AdaptiveKnnParams, WeightedGraph};
pub use io::{DistanceMatrix, Metric, PointSet, PointSetKind};
pub use report::AnalysisReport;
pub use pipeline::{run_pipeline, RunConfig};
pub use rsa::Rdm;

/// Version string stamped into report provenance.
pub const TOOL_VERSION: &str = concat!("curvalign ", env!("CARGO_PKG_VERSION"));
