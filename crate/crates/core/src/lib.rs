//! Top-k vulnerable node detection in uncertain directed graphs.
//!
//! A node defaults on its own with its self-risk probability, and a default
//! spreads along each edge with that edge's diffusion probability. The
//! vulnerable nodes are those with the highest overall default probability
//! across all possible worlds.
//!
//! The crate provides, from slowest to fastest:
//!
//! - [`oracle`]: exact enumeration over all worlds (tiny graphs only);
//! - [`forward`]: forward Monte-Carlo sampling (methods N and SN);
//! - [`bounds`] + [`reverse`]: bound-based candidate reduction and lazy
//!   reverse sampling (methods SR and BSR);
//! - [`bottomk`]: bottom-k early termination on top of BSR (method BSRBK).
//!
//! All randomness flows from [`coins::WorldCoins`], a counter-based source, so
//! every result is a pure function of the graph, the parameters and the seed.

pub mod bottomk;
pub mod bounds;
pub mod coins;
pub mod error;
pub mod forward;
pub mod graph;
pub mod harness;
pub mod oracle;
pub mod result;
pub mod reverse;

pub use error::{Error, GraphError, Result};
pub use forward::ApproxParams;
pub use graph::{NodeId, ReversedGraph, UncertainGraph};
pub use result::{Estimator, Method, RankedNode, RunParams, TopKResult};
