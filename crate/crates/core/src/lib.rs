//! Evaluation harness for how well text embedding models capture the meaning
//! of symbolic expressions: similarity statistics against paired correct and
//! incorrect paraphrases, plus an SVM classification arm.

pub mod classify;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod report;
pub mod runner;
pub mod simeval;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
