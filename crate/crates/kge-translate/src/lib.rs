//! Files, parallel evaluation and the command-line runner around
//! [`kge_translate_core`].

pub mod cli;
pub mod error;
pub mod model_file;
pub mod parallel;
pub mod triples_file;

pub use error::{Error, ModelFormatError, Result};
pub use model_file::{load_model, save_model, SavedModel};
pub use parallel::ParallelEvaluator;
pub use triples_file::load_dataset;

pub use kge_translate_core as core;
