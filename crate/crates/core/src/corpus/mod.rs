//! Document data model, the sharded JSONL corpus format and per-stage
//! drop accounting shared by every pipeline stage.

mod document;
mod shard;
mod stats;

pub use document::{doc_text_bytes, DocId, Document, ImageNode, Node, TextNode, UNASSIGNED};
pub use shard::{
    read_documents, read_shard, write_documents, write_shard, ShardFile, ShardManifest,
    ShardReader, DEFAULT_DOCS_PER_SHARD,
};
pub use stats::{Granularity, StageStats, StatsRecorder, StatsReport};
