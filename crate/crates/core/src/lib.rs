//! Protocol-driven mining of web content as review evidence.
//!
//! The crate is organised along the stages of a review run:
//!
//! * [`protocol`] parses and validates the review protocol file.
//! * [`harvest`] runs searches, scores them against the quasi-gold standard,
//!   fetches pages politely and extracts their text.
//! * [`corpus`] tokenizes text and builds document-term and TF-IDF matrices.
//! * [`extraction`] selects relevant pages, fits a seeded topic model and
//!   segments pages into the columns of the extraction schema.
//! * [`synthesis`] groups each column's segments into themes.
//! * [`rules`] mines cross-column association rules into a knowledge model.
//! * [`pipeline`] runs the stages against a work directory with a manifest.
//!
//! Data-parallel loops go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod corpus;
pub mod exec;
pub mod extraction;
pub mod harvest;
pub mod pipeline;
pub mod protocol;
pub mod rules;
pub mod store;
pub mod synthesis;

pub use exec::Exec;
pub use protocol::{parse_protocol, validate_protocol, ReviewProtocol};
