//! WARC ingestion and DOM-based document assembly.

mod extract;
mod reader;

pub use extract::{extract_document, resolve_url, ExtractGates, ExtractReject, TagPolicy};
pub use reader::{iterate_records, WarcReader, WarcReaderStats, WarcRecordRef};
