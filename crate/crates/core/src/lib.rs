//! Behavioral profiling of conspiracy-theory communities on social media:
//! cohort selection, feature extraction and classification.

pub mod cohort;
pub mod config;
pub mod corpus;
pub mod features;
pub mod lexicon;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod statkit;
pub mod synth;
pub mod topics;
