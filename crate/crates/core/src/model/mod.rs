//! The graph matching network: shared RGCN encoder, cross attention,
//! matching, pooling and cosine scoring.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    decode_checkpoint, decode_tensor, encode_checkpoint, encode_tensor, load_checkpoint, params_fingerprint, save_checkpoint,
    Checkpoint,
};
pub use config::{AggOp, MatchOp, ModelConfig};
pub use forward::{
    aggregate, context_repr, cross_attention, encode, match_nodes, pooled_pair, prepare_graph, rgcn_forward,
    score_embeddings, score_pair, triple_loss, PreparedGraph,
};
pub use params::{init_params, unified_relations, BoundLayer, BoundParams, DgmsParams, RgcnLayer};
