pub mod corpus;
pub mod error;
pub mod warc;

pub use error::{Error, Result};
pub mod langid;
pub mod scorer;
pub mod text;
pub mod dedup;
pub mod images;
pub mod fetch;
pub mod joint;
pub mod metrics;
pub mod pipeline;
