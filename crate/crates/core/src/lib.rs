//! Converts a multilingual knowledge graph into knowledge-intensive pretraining
//! corpora: code-switched and parallel triple sentences, cycle-based reasoning
//! samples, their masked training records, and a multiple-choice relation
//! reasoning dataset built from the same cycles.
//!
//! Stages, in dependency order:
//!
//! - [`store`]: lexicon + triple ingest into an interned, indexed [`KnowledgeGraph`].
//! - [`sentence`]: `h [mask] r [mask] t.` sentences, code-switched or parallel.
//! - [`cycles`]: length-3 and diagonal length-4 cycle enumeration and rendering.
//! - [`xlr`]: multiple-choice items, split balancing, leakage filtering.
//! - [`mask`]: knowledge and reasoning masking tasks.
//! - [`mix`]: seeded shuffle of all training streams into one tagged stream.
//! - [`pipeline`]: configuration, stage caching and the statistics report.

pub mod cycles;
pub mod error;
pub mod inspect;
pub mod jsonl;
pub mod lang;
pub mod mask;
pub mod mix;
pub mod pipeline;
pub mod seed;
pub mod sentence;
pub mod store;
pub mod xlr;

pub use error::{Error, Result};
pub use lang::Lang;
pub use store::{EntityIdx, KnowledgeGraph, Lexicon, RelationIdx, TripleIdx};
