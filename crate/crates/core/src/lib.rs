//! Temporal link prediction with per-node neighborhood caches.
//!
//! Each node keeps a small recurrent self representation plus fixed-size
//! hashed dictionaries of its 1-hop and 2-hop neighbors. To score a link
//! `(u, v)` the two nodes' caches are joined: every distinct cached node gets
//! a membership bit vector and the sum of its cached values, and an attention
//! readout turns that set into a logit.

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod joint;
pub mod ncache;
pub mod neural;
pub mod rng;

pub use error::{Error, Result};
