//! Core engine for building human-curated taxonomies over short text descriptors.

pub mod cluster;
pub mod digest;
pub mod embedding;
pub mod index;
pub mod ingest;
pub mod precompute;
pub mod reduce;
pub mod session;
pub mod store;
