//! MHN: metapath-guided heterogeneous graph embedding.
//!
//! Typed graph ingestion ([`hetgraph`]), metapath sampling and discovery
//! ([`metapath`]), a small reverse-mode tensor engine ([`diffgrad`]), the
//! attention model ([`mhn`]), training loops ([`training`]) and downstream
//! evaluation ([`evalkit`]). The `mhn` binary in [`cli`] wires them together.

pub mod diffgrad;
pub mod hetgraph;
pub mod metapath;
pub mod rng;
pub mod synthetic;
pub mod mhn;
pub mod training;
pub mod evalkit;
pub mod cli;
