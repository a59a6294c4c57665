//! GPS trajectory vectorization and activity recognition.
//!
//! The pipeline runs [`ingest`] → [`vectorizer`] → [`features`] →
//! [`trainer`] → [`metrics`], with [`models`] built on the small layer
//! library in [`nn`] and vectorized data persisted through [`vecstore`].

pub mod features;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod synthetic;
pub mod trainer;
pub mod vecstore;
pub mod vectorizer;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/ingest.md")]
pub mod book_ingest {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/vectorization.md")]
pub mod book_vectorization {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
pub mod book_models {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/training.md")]
pub mod book_training {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod book_metrics {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/storage.md")]
pub mod book_storage {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod book_cli {}
