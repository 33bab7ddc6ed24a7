//! Spatiotemporal event mining for georeferenced incident reports.
//!
//! The crate covers the analysis path end to end:
//!
//! - [`ingest`]: parse raw event records and resolve them to counties through a gazetteer
//! - [`corpus`]: tokenize report text into an indexed, timestamped corpus; synthesize datasets
//! - [`lda`]: static topic model trained by collapsed Gibbs sampling
//! - [`dyntopic`]: continuous-time dynamic topic model with variational Kalman smoothing
//! - [`relevance`]: county-year topic-proportion tables, threshold marks, posteriors, filters
//! - [`thematic`]: choropleth aggregation, class breaks, palettes and dual-scale timelines
//! - [`geoexport`]: KML, GeoJSON and timeline JSON writers
//!
//! Runnable walkthroughs for each capability live in this crate's `examples/` directory.

pub mod corpus;
pub mod dyntopic;
pub mod geoexport;
pub mod ingest;
pub mod lda;
pub mod relevance;
pub mod thematic;

pub use corpus::{Corpus, Document, Stopwords, SynthProfile, Vocabulary};

pub use ingest::{GeoEvent, Gazetteer, RawEvent, StudyWindow};
pub use lda::{LdaModel, LdaParams, ThetaMatrix};

pub use dyntopic::{CdtmModel, CdtmParams, Epochs, VariationalState};
pub use relevance::{MarkSet, ProportionTable};
pub use thematic::{ChoroplethLayer, TimeSeries};
