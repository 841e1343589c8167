//! Exact inference for the chain-structured hidden-state CRF.
//!
//! The composite hidden state of segment `t` is a pair `(o, p)`: observation
//! `o` (0 = original segment, `j ≥ 1` = `j`-th alternative) and latent pose
//! `p`. States are flattened to `(o - o_min)·S + p`, where `o_min` is 1 for a
//! segment whose original is disallowed and 0 otherwise. All inference runs
//! in log space.
//!
//! The pairwise term only depends on the pose components, so every
//! recursion first reduces over the observation component. A step costs
//! `O(|H| + S²)` per class instead of `O(|H|²)`, with identical results.

mod chain;
mod inference;
mod lattice;
mod params;

pub use chain::{ChainInput, CompositeState, Configuration, StateDomain};
pub use inference::{
    class_log_scores, class_posterior, class_posterior_with_decode, log_partition, map_decode,
    posterior_marginals, potential, predict, unary_composite, unary_composite_dense, unary_plain,
    Marginals, PosteriorResult,
};
pub(crate) use lattice::Lattice;
pub use params::{ModelParameters, TrainedModel};
