//! Corpus ingestion, ranking metrics, the embedding index and search.

mod corpus;
mod index;
mod metrics;
mod retrieval;

pub use corpus::{
    code_lines, ingest_corpus, ingest_file, read_corpus, read_raw_entries, write_corpus, Corpus, CorpusEntry,
    FilterConfig, FilterReport, RawEntry,
};
pub use index::EmbeddingIndex;
pub use metrics::{build_pools, mrr, rank_scores, success_at_k, CandidatePool, RankedList};
pub use retrieval::{prepare_query, rank_candidates, EvalReport, PreparedCorpus, Retriever};
