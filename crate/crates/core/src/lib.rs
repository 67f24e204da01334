//! Mesoscopic text networks: paragraph windows linked by tf-idf similarity,
//! characterized by concentric accessibility and symmetry and by the
//! recurrence signature of similarity edges along the reading order.

pub mod concentric;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod mesonet;
pub mod pipeline;
pub mod signature;
pub mod stats;
pub mod study;
pub mod vectorize;

pub use corpus::{AnnotationSidecar, OrganizedText, Preprocessor, RawBook};
pub use error::{Error, Result};
pub use graph::Graph;
pub use mesonet::MesoNetwork;
pub use pipeline::{analyze_book, analyze_organized, NetworkParams};
