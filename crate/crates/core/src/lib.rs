//! Accelerometer-to-behaviour classification pipeline.
//!
//! Raw tri-axial recordings are aligned with behaviour annotations
//! ([`ingest`]), expanded into eight derived channels ([`signal`]), cut into
//! labelled windows ([`windowing`]) and turned into one of three feature
//! families ([`features`]). Ridge and random-forest classifiers ([`models`])
//! are tuned and scored with an animal-grouped protocol ([`eval`]).
//! [`synthgen`] produces labelled synthetic recordings for testing.

pub mod behaviour;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod signal;
pub mod synthgen;
pub mod windowing;

pub use behaviour::Behaviour;
pub use error::{Error, Result};
