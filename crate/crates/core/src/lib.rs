//! Energy-aware cloud federation formation.
//!
//! A set of cloud providers, each owning hosts and a VM workload, decide which
//! federations to join. The value of a federation is its joint revenue minus the
//! minimum hourly energy cost of placing the joint workload on the joint host
//! set ([`placement`]). Values are divided with the Shapley value restricted to
//! the federation ([`coalitional`]); providers then move between federations by
//! selfish hedonic shifts until no one wants to move ([`hedonic`]).
//! [`core_analysis`] decides whether the grand coalition could be stabilised by
//! any payoff division at all, and [`workbench`] ties everything together into
//! reproducible experiments.

pub mod coalition;
pub mod coalitional;
pub mod core_analysis;
pub mod domain;
pub mod error;
pub mod hedonic;
pub mod placement;
pub mod workbench;

pub use coalition::{Coalition, Partition};
pub use error::{Error, Result};
