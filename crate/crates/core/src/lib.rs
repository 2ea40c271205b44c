pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod ensemble_opt;
pub mod error;
pub mod features;
pub mod jsonl;
pub mod llm;
pub mod mapping;
pub mod pipeline;
pub mod prompting;
pub mod synthetic;
pub mod vocabulary;

pub use error::{Error, Result};
