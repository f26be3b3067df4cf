//! Domain types shared across the toolkit: meaning representations, texts,
//! QE instances, datasets and the vocabulary.

mod instance;
mod mr;
mod tokenize;
mod vocab;

pub use instance::{check_rating, Criterion, Dataset, QeInstance, TextOutput, RATING_MAX, RATING_MIN};
pub use mr::{MeaningRepresentation, Slot, SLOT_MARKER};
pub use tokenize::{is_article, is_punctuation, tokenize};
pub use vocab::{build_vocabulary, Vocabulary, PAD, PAD_ID, UNK, UNK_ID};
