//! Referenceless quality estimation for natural language generation.
//!
//! A dual-encoder GRU network rates single MR/text pairs and ranks competing
//! outputs for the same MR, trained jointly with squared-error loss on
//! ratings and pairwise hinge loss on rankings. Training data can be
//! augmented with synthetically corrupted texts.

pub mod benchmark;
pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod data;
pub mod delex;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use checkpoint::{Checkpoint, TrainingMetadata};
pub use config::{SelectionMetric, TrainConfig};
pub use data::{Criterion, Dataset, MeaningRepresentation, QeInstance, TextOutput, Vocabulary};
pub use error::{Error, Result};
pub use model::{Decision, QeModel, ScorePair};
