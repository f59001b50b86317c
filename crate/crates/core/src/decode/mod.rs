//! Exact maximizers `argmax_{z ∈ Z} zᵀs` over structured output spaces,
//! plus brute-force oracles.

mod brute;
mod cost;
mod eisner;
mod scores;
mod sdp;

pub use brute::{brute_force_tree_argmax, enumerate_trees, MAX_ENUMERATION_LENGTH};
pub use cost::{cost_augmented_graph, cost_augmented_tree, hamming, DEFAULT_COST_WEIGHT};
pub use eisner::eisner_decode;
pub use scores::{ArcScores, SdpScores};
pub use sdp::{graph_score, sdp_decode};
