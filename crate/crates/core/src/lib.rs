//! Hierarchical-structure analysis of text.
//!
//! The pipeline runs from raw text to a concept hierarchy:
//!
//! * [`corpus`] tokenizes and segments text, reduces it onto a support set
//!   of terms and builds segment-by-term frequency tables.
//! * [`embed`] maps segments and terms into a common Euclidean factor space
//!   with correspondence analysis.
//! * [`cvnc`] recodes squared distances onto `{0, 1, 2}`.
//! * [`umetry`] classifies triangles and measures how ultrametric a point
//!   set or a textual time series is.
//! * [`hclust`] builds dendrograms.
//! * [`ontology`] turns dendrograms into oriented trees and concept
//!   hierarchies, and reads subsumption triples off the time series.
//! * [`select`] finds the terms nearest to each segment.
//! * [`pipeline`] strings these together and writes the artifacts.

pub mod corpus;
pub mod cvnc;
pub mod dissimilarity;
pub mod embed;
pub mod error;
pub mod hclust;
pub mod ontology;
pub mod pipeline;
pub mod select;
pub mod umetry;

pub use dissimilarity::Dissimilarity;
pub use error::{Error, Result};
