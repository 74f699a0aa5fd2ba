//! Hybrid lexical and dense retrieval for statute question answering, with
//! an LLM answer step that re-ranks articles by what the answer cites.
//!
//! The usual flow: [`corpus::Corpus::build`] chunks articles and appends the
//! no-answer sentinel, [`lexical::Bm25Index`] and [`dense::DenseIndex`] index
//! the chunks, [`search::Indexes`] runs fused retrieval, and
//! [`rag::answer_pipeline`] answers and picks references.
//! [`engine::Engine`] bundles all of it behind serializable responses.

pub mod corpus;
pub mod dense;
pub mod engine;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fusion;
#[cfg(feature = "http")]
mod http;
pub mod jsonl;
pub mod lexical;
pub mod rag;
pub mod ranked;
pub mod search;
pub mod text;

pub use error::{Error, ProviderError, Result};
pub use exec::Parallelism;
pub use ranked::{RankedList, ScoredHit};

/// Fixed no-answer reply, also the text of the negative sentinel chunk.
pub const NO_ANSWER: &str = "Không tìm thấy câu trả lời.";
